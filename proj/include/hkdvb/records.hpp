#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hkdvb {

using RecordValue = std::variant<double, std::int64_t, bool, std::string, std::vector<double>>;

// One flat output record; keys are kept sorted so serialization is
// deterministic byte for byte.
struct Record {
    std::map<std::string, RecordValue> fields;

    Record& num(const std::string& key, double v);
    Record& integer(const std::string& key, std::int64_t v);
    Record& boolean(const std::string& key, bool v);
    Record& text(const std::string& key, std::string v);
    Record& series(const std::string& key, std::vector<double> v);
};

// %.17g, so doubles round-trip exactly.
std::string format_double(double v);

std::string to_jsonl(const Record& record);
std::string to_jsonl(std::span<const Record> records);

// Header is the sorted union of keys; missing fields stay empty; vector
// fields are joined with ';' and quoted.
std::string to_csv(std::span<const Record> records);

enum class RecordFormat { jsonl, csv, both };

RecordFormat record_format_from_string(const std::string& name);
std::string to_string(RecordFormat format);

// Writes <out_dir>/<command>-<stamp>-<seed>.<ext>; stamp defaults to the
// current UTC time. Returns the written paths.
std::vector<std::string> write_records(std::span<const Record> records, RecordFormat format,
                                       const std::string& out_dir, const std::string& command,
                                       std::uint64_t seed, const std::string& stamp = "");

}  // namespace hkdvb
