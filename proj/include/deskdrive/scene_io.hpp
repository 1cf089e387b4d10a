#pragma once

#include <string>

#include "deskdrive/scene.hpp"

namespace deskdrive {

// Canonical log container: JSON lines. One header line carrying map + meta,
// then one line per frame. Numbers serialize with shortest exact
// representation, so parse -> serialize round-trips byte for byte.
std::string log_to_jsonl(const DriveLog& log);
DriveLog log_from_jsonl(const std::string& text);

void save_log(const DriveLog& log, const std::string& path);
DriveLog load_log(const std::string& path);

// Atomic file write (temp then rename) shared by every artifact writer.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace deskdrive
