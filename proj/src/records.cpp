#include "hkdvb/records.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hkdvb/errors.hpp"

namespace hkdvb {

Record& Record::num(const std::string& key, double v) {
    fields[key] = v;
    return *this;
}
Record& Record::integer(const std::string& key, std::int64_t v) {
    fields[key] = v;
    return *this;
}
Record& Record::boolean(const std::string& key, bool v) {
    fields[key] = v;
    return *this;
}
Record& Record::text(const std::string& key, std::string v) {
    fields[key] = std::move(v);
    return *this;
}
Record& Record::series(const std::string& key, std::vector<double> v) {
    fields[key] = std::move(v);
    return *this;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string escape_json(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

std::string value_to_json(const RecordValue& v) {
    struct Visitor {
        std::string operator()(double d) const { return format_double(d); }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(const std::string& s) const { return "\"" + escape_json(s) + "\""; }
        std::string operator()(const std::vector<double>& a) const {
            std::string out = "[";
            for (size_t i = 0; i < a.size(); ++i) {
                if (i) out += ",";
                out += format_double(a[i]);
            }
            out += "]";
            return out;
        }
    };
    return std::visit(Visitor{}, v);
}

std::string value_to_csv(const RecordValue& v) {
    struct Visitor {
        std::string operator()(double d) const { return format_double(d); }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(const std::string& s) const {
            if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
            std::string out = "\"";
            for (char c : s) {
                if (c == '"') out += "\"\"";
                else out += c;
            }
            out += "\"";
            return out;
        }
        std::string operator()(const std::vector<double>& a) const {
            std::string joined;
            for (size_t i = 0; i < a.size(); ++i) {
                if (i) joined += ";";
                joined += format_double(a[i]);
            }
            return "\"" + joined + "\"";
        }
    };
    return std::visit(Visitor{}, v);
}

}  // namespace

std::string to_jsonl(const Record& record) {
    std::string out = "{";
    bool first = true;
    for (const auto& [key, value] : record.fields) {
        if (!first) out += ",";
        first = false;
        out += "\"" + escape_json(key) + "\":" + value_to_json(value);
    }
    out += "}";
    return out;
}

std::string to_jsonl(std::span<const Record> records) {
    std::string out;
    for (const Record& r : records) {
        out += to_jsonl(r);
        out += "\n";
    }
    return out;
}

std::string to_csv(std::span<const Record> records) {
    std::set<std::string> keys;
    for (const Record& r : records) {
        for (const auto& [key, value] : r.fields) keys.insert(key);
    }
    std::string out;
    bool first = true;
    for (const auto& key : keys) {
        if (!first) out += ",";
        first = false;
        out += key;
    }
    out += "\n";
    for (const Record& r : records) {
        first = true;
        for (const auto& key : keys) {
            if (!first) out += ",";
            first = false;
            const auto it = r.fields.find(key);
            if (it != r.fields.end()) out += value_to_csv(it->second);
        }
        out += "\n";
    }
    return out;
}

RecordFormat record_format_from_string(const std::string& name) {
    if (name == "jsonl") return RecordFormat::jsonl;
    if (name == "csv") return RecordFormat::csv;
    if (name == "both") return RecordFormat::both;
    throw std::invalid_argument("unknown record format: " + name);
}

std::string to_string(RecordFormat format) {
    switch (format) {
        case RecordFormat::jsonl: return "jsonl";
        case RecordFormat::csv: return "csv";
        case RecordFormat::both: return "both";
    }
    return "jsonl";
}

namespace {

std::string utc_stamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("write_records: cannot open " + path);
    out << content;
    if (!out) throw ValidationError("write_records: write failed for " + path);
}

}  // namespace

std::vector<std::string> write_records(std::span<const Record> records, RecordFormat format,
                                       const std::string& out_dir, const std::string& command,
                                       std::uint64_t seed, const std::string& stamp) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ValidationError("write_records: cannot create directory " + out_dir);
    const std::string tag = stamp.empty() ? utc_stamp() : stamp;
    const std::string base = out_dir + "/" + command + "-" + tag + "-" + std::to_string(seed);
    std::vector<std::string> paths;
    if (format == RecordFormat::jsonl || format == RecordFormat::both) {
        const std::string path = base + ".jsonl";
        write_file(path, to_jsonl(records));
        paths.push_back(path);
    }
    if (format == RecordFormat::csv || format == RecordFormat::both) {
        const std::string path = base + ".csv";
        write_file(path, to_csv(records));
        paths.push_back(path);
    }
    return paths;
}

}  // namespace hkdvb
