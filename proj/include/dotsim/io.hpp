#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dotsim/experiment.hpp"
#include "dotsim/grid.hpp"

#include <json.hpp>

namespace dotsim {

/// Shortest round-trip decimal representation (locale-independent, '.'
/// decimal point), so repeated runs give byte-identical files.
std::string format_double(double v);

uint64_t fnv1a64(const std::string& data);
std::string hex64(uint64_t v);

/// Simple rectangular table with named columns, CSV- and JSON-serializable.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

void write_text_file(const std::filesystem::path& path, const std::string& body);

std::string trace_to_csv(const TimeTrace& t, const std::string& value_name = "p_singlet");
nlohmann::json trace_to_json(const TimeTrace& t);

std::string grid_to_csv(const ScanGrid& g);
nlohmann::json grid_to_json(const ScanGrid& g);

std::string table_to_csv(const Table& t);
nlohmann::json table_to_json(const Table& t);

std::string spectrum_to_csv(const Spectrum& s);

nlohmann::json metadata_to_json(const Metadata& m);
Metadata metadata_from_json(const nlohmann::json& j);

}
