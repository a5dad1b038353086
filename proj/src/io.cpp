#include "dotsim/io.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace dotsim {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f << body;
}

std::string trace_to_csv(const TimeTrace& t, const std::string& value_name) {
    std::string out = "time_ns," + value_name + "\n";
    for (std::size_t i = 0; i < t.times.size(); ++i) {
        out += format_double(t.times[i]);
        out += ',';
        out += format_double(t.p_singlet[i]);
        out += '\n';
    }
    return out;
}

nlohmann::json metadata_to_json(const Metadata& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m.scalars) j[k] = v;
    for (const auto& [k, v] : m.strings) j[k] = v;
    for (const auto& [k, v] : m.vectors) j[k] = v;
    return j;
}

Metadata metadata_from_json(const nlohmann::json& j) {
    Metadata m;
    for (const auto& [k, v] : j.items()) {
        if (v.is_number())
            m.scalars[k] = v.get<double>();
        else if (v.is_string())
            m.strings[k] = v.get<std::string>();
        else if (v.is_array())
            m.vectors[k] = v.get<std::vector<double>>();
    }
    return m;
}

nlohmann::json trace_to_json(const TimeTrace& t) {
    nlohmann::json j;
    j["axes"] = {{"time", t.times}};
    j["units"] = {{"time", "ns"}, {"p_singlet", "probability"}};
    j["data"] = t.p_singlet;
    j["metadata"] = metadata_to_json(t.meta);
    return j;
}

std::string grid_to_csv(const ScanGrid& g) {
    // Header carries both axis names; first column is the y value of each row.
    std::string out = g.y.name + "_" + g.y.unit + "\\" + g.x.name + "_" + g.x.unit;
    for (const double x : g.x.values) {
        out += ',';
        out += format_double(x);
    }
    out += '\n';
    for (std::size_t iy = 0; iy < g.y.size(); ++iy) {
        out += format_double(g.y.values[iy]);
        for (std::size_t jx = 0; jx < g.x.size(); ++jx) {
            out += ',';
            out += format_double(g.at(iy, jx));
        }
        out += '\n';
    }
    return out;
}

nlohmann::json grid_to_json(const ScanGrid& g) {
    nlohmann::json j;
    j["axes"] = {{"x", {{"name", g.x.name}, {"values", g.x.values}}},
                 {"y", {{"name", g.y.name}, {"values", g.y.values}}}};
    j["units"] = {{g.x.name, g.x.unit}, {g.y.name, g.y.unit}};
    j["data"] = g.data;  // row-major
    j["metadata"] = metadata_to_json(g.meta);
    return j;
}

std::string table_to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (i) out += ',';
        out += t.columns[i];
    }
    out += '\n';
    for (const auto& row : t.rows) {
        if (row.size() != t.columns.size())
            throw std::invalid_argument("table_to_csv: ragged row");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

nlohmann::json table_to_json(const Table& t) {
    nlohmann::json j;
    j["columns"] = t.columns;
    j["rows"] = t.rows;
    return j;
}

std::string spectrum_to_csv(const Spectrum& s) {
    std::string out = "frequency_ghz,magnitude\n";
    for (std::size_t i = 0; i < s.frequency.size(); ++i) {
        out += format_double(s.frequency[i]);
        out += ',';
        out += format_double(s.magnitude[i]);
        out += '\n';
    }
    return out;
}

}
