#include "fractune/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "fractune/error.hpp"

namespace fractune {

namespace {
std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}
}  // namespace

int CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    throw ParameterError("csv: no column '" + name + "'");
}

const std::string& CsvTable::at(std::size_t row, const std::string& name) const
{
    static const std::string empty;
    auto c = static_cast<std::size_t>(column(name));
    const auto& r = rows.at(row);
    return c < r.size() ? r[c] : empty;
}

double CsvTable::number(std::size_t row, const std::string& name) const
{
    const auto& s = at(row, name);
    if (s.empty())
        return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size())
            throw ParameterError("");
        return v;
    } catch (const std::exception&) {
        throw ParameterError("csv: '" + s + "' in column " + name + " is not a number");
    }
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw ParameterError("cannot open " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (first) {
            t.header = split(line);
            first = false;
        } else {
            t.rows.push_back(split(line));
        }
    }
    if (first)
        throw ParameterError(path + ": empty csv");
    return t;
}

std::uint64_t fnv1a64(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ParameterError("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string hex64(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::vector<std::string> verify_checksums(const std::string& dir)
{
    std::ifstream is(dir + "/CHECKSUMS");
    if (!is)
        throw ParameterError("no CHECKSUMS in " + dir);
    std::vector<std::string> bad;
    std::string hash, name;
    while (is >> hash >> name) {
        std::string got;
        try {
            got = hex64(fnv1a64(read_file(dir + "/" + name)));
        } catch (const ParameterError&) {
        }
        if (got != hash)
            bad.push_back(name);
    }
    return bad;
}

void write_checksums(const std::string& dir, const std::vector<std::string>& files)
{
    std::ofstream os(dir + "/CHECKSUMS");
    if (!os)
        throw ParameterError("cannot write " + dir + "/CHECKSUMS");
    for (const auto& f : files)
        os << hex64(fnv1a64(read_file(dir + "/" + f))) << "  " << f << "\n";
}

}  // namespace fractune
