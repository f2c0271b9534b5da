#pragma once

#include <charconv>
#include <string>

#include <Eigen/Dense>

namespace ovb {

/// Locale-independent shortest round-trip formatting; keeps every emitted
/// JSON/JSONL file byte-deterministic.
inline std::string json_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string json_array(const Eigen::VectorXd& v) {
    std::string out = "[";
    for (int i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += json_number(v(i));
    }
    out += ']';
    return out;
}

inline std::string json_matrix(const Eigen::MatrixXd& m) {
    std::string out = "[";
    for (int i = 0; i < m.rows(); ++i) {
        if (i) out += ',';
        out += json_array(m.row(i).transpose());
    }
    out += ']';
    return out;
}

}  // namespace ovb
