#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace disrbm {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;
using Eigen::VectorXi;
using Index = Eigen::Index;

/// Thrown when a computation produces non-finite values or leaves the
/// numerically valid regime (CLI exit code 3).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on malformed or unreadable files (CLI exit code 4).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Support of one layer's units.
///   Binary: {0,1}
///   Spin:   {-1,+1}
///   OneHot: q categorical states per site, embedded as q 0/1 units with
///           exactly one active state per site.
enum class UnitKind : std::uint8_t { Binary = 0, Spin = 1, OneHot = 2 };

inline const char* to_string(UnitKind k) {
    switch (k) {
        case UnitKind::Binary: return "binary";
        case UnitKind::Spin: return "spin";
        case UnitKind::OneHot: return "onehot";
    }
    return "?";
}

inline UnitKind unit_kind_from_string(const std::string& s) {
    if (s == "binary") return UnitKind::Binary;
    if (s == "spin") return UnitKind::Spin;
    if (s == "onehot") return UnitKind::OneHot;
    throw std::invalid_argument("unknown unit kind: " + s);
}

}  // namespace disrbm
