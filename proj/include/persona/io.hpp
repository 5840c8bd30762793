#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace persona {

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written report.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field if it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

/// Worker cap from PERSONA_THREADS (unset or invalid -> 0, meaning no cap).
int thread_cap_from_env();

/// Applies a worker cap to the OpenMP runtime; 0 leaves the default.
void set_thread_cap(int threads);

int max_threads();

}  // namespace persona
