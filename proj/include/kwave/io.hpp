#ifndef KWAVE_IO_HPP
#define KWAVE_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "kwave/error.hpp"

namespace kwave {

/// Writes the file once: content goes to a sibling temporary that is renamed into place.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << content;
    os.flush();
    if (!os) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

/// Renders through a stream callback, then writes atomically.
inline void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& render) {
  std::ostringstream os;
  render(os);
  atomic_write(path, os.str());
}

}  // namespace kwave

#endif  // KWAVE_IO_HPP
