#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fractune {

// plain comma-separated table, no quoting; blank cells stay empty strings
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // throws ParameterError when absent
    const std::string& at(std::size_t row, const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;  // NaN for an empty cell
};

CsvTable read_csv(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string read_file(const std::string& path);
std::string hex64(std::uint64_t h);

// CHECKSUMS lines are "<16 hex digits>  <file name>"; returns the names that do not match
std::vector<std::string> verify_checksums(const std::string& dir);
void write_checksums(const std::string& dir, const std::vector<std::string>& files);

}  // namespace fractune
