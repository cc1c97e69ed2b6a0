#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adiaphase/types.hpp"

namespace adiaphase {

using Json = nlohmann::json;  // std::map-backed: keys serialize sorted

// One CSV cell: a finite number or an explicit mask token (never a blank).
struct CsvCell {
    std::optional<double> value;

    static CsvCell masked() { return {}; }
    static CsvCell of(double v) { return {v}; }
};

// 17-significant-digit decimal rendering keeps reruns byte-identical and
// round-trips doubles exactly.
inline std::string format_number(double v) {
    if (!std::isfinite(v)) throw Error("refusing to write non-finite value to CSV");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
        : out_(path), n_cols_(columns.size()) {
        if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ',';
            out_ << columns[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<CsvCell>& cells) {
        if (cells.size() != n_cols_) throw Error("CSV row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << (cells[i].value ? format_number(*cells[i].value) : "masked");
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t n_cols_;
};

inline Json json_complex(Complex z) {
    return Json{{"re", z.real()}, {"im", z.imag()}};
}

// Named numerical check with its threshold, as emitted by the consistency
// audit and the ratio-test verdicts.
struct CheckResult {
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string note;

    Json to_json() const {
        Json j{{"name", name}, {"measured", measured}, {"threshold", threshold},
               {"pass", pass}};
        if (!note.empty()) j["note"] = note;
        return j;
    }
};

struct RatioVerdict {
    std::string name;
    double t_low = 0.0;
    double t_high = 0.0;
    double measured_ratio = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    bool pass = false;
    std::string note;  // e.g. "at integrator floor, ratio not meaningful"

    Json to_json() const {
        Json j{{"name", name},
               {"T_low", t_low},
               {"T_high", t_high},
               {"measured_ratio", measured_ratio},
               {"window", Json::array({window_lo, window_hi})},
               {"pass", pass}};
        if (!note.empty()) j["note"] = note;
        return j;
    }
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
}

}  // namespace adiaphase
