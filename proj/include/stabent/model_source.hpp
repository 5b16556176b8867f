#ifndef STABENT_MODEL_SOURCE_HPP
#define STABENT_MODEL_SOURCE_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stabent/error.hpp"
#include "stabent/expr.hpp"
#include "stabent/linalg.hpp"

namespace stabent {

/// A parsed model x' = f(x, w) + B u, one expression per state coordinate.
struct ModelSource {
  std::size_t state_dim = 0;
  std::size_t control_dim = 0;
  std::size_t noise_dim = 0;
  Matrix control_matrix;
  std::vector<Expr> equations;
};

// Model text, one statement per line, '#' starts a comment:
//
//   state 2
//   noise 1
//   control 2
//   B = [1, 0; 0, 1]
//   x1' = (x1^3 + x1) * (1 + x2^2)
//   x2' = 0.5 * x2 + w1
//
// Declarations are optional. Without `state` the dimension is the number of
// equations; without `noise` it is the largest noise index used; without
// `control` and `B` the control enters every coordinate (B = I). A text with
// no '=' and no declarations is read as bare expressions, one per line.

namespace detail {

struct RawLine {
  std::string text;
  std::size_t line = 0;
  std::size_t column = 1;
};

inline std::string_view trim(std::string_view s, std::size_t* lead = nullptr) {
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  std::size_t e = s.size();
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  if (lead) *lead = b;
  return s.substr(b, e - b);
}

inline std::size_t parse_declared_size(std::string_view value, SourceLocation loc) {
  std::size_t n = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), n);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ParseError("expected a non-negative integer, got '" + std::string(value) + "'", loc);
  }
  return n;
}

inline std::size_t max_index(const Expr& e, NodeKind kind) {
  switch (e.kind()) {
    case NodeKind::kConstant:
      return 0;
    case NodeKind::kState:
    case NodeKind::kNoise:
      return e.kind() == kind ? e.index() + 1 : 0;
    case NodeKind::kPow:
    case NodeKind::kNeg:
      return max_index(e.lhs(), kind);
    default:
      return std::max(max_index(e.lhs(), kind), max_index(e.rhs(), kind));
  }
}

inline Matrix parse_matrix_literal(std::string_view body, SourceLocation loc) {
  std::size_t lead = 0;
  std::string_view s = trim(body, &lead);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw ParseError("matrix must be written as [a, b; c, d]", loc);
  }
  s = s.substr(1, s.size() - 2);
  std::vector<std::vector<double>> rows;
  std::size_t row_start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && s[i] != ';') continue;
    std::string_view row = s.substr(row_start, i - row_start);
    std::vector<double> entries;
    std::size_t cell_start = 0;
    for (std::size_t j = 0; j <= row.size(); ++j) {
      if (j < row.size() && row[j] != ',') continue;
      std::string_view cell = trim(row.substr(cell_start, j - cell_start));
      if (cell.empty()) throw ParseError("empty matrix entry", loc);
      const Expr e = parse_expression(cell, ExprDims{0, 0}, loc);
      entries.push_back(evaluate(e, {}, {}));
      cell_start = j + 1;
    }
    rows.push_back(std::move(entries));
    row_start = i + 1;
  }
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw DimensionError("matrix rows have unequal lengths");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace detail

inline ModelSource parse_model(std::string_view text) {
  using detail::RawLine;
  std::optional<std::size_t> declared_state, declared_noise, declared_control;
  std::optional<Matrix> declared_b;
  std::vector<std::optional<RawLine>> equations;
  std::vector<RawLine> bare;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view raw = text.substr(start, end - start);
    start = end + 1;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::size_t lead = 0;
    const std::string_view line = detail::trim(raw, &lead);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const SourceLocation loc{line_no, lead + 1};

    auto keyword = [&](std::string_view kw) {
      return line.size() > kw.size() && line.substr(0, kw.size()) == kw &&
             std::isspace(static_cast<unsigned char>(line[kw.size()]));
    };
    if (keyword("state") || keyword("noise") || keyword("control")) {
      const std::size_t sp = line.find_first_of(" \t");
      const std::string_view kw = line.substr(0, sp);
      const std::size_t n = detail::parse_declared_size(detail::trim(line.substr(sp)), loc);
      auto& slot = kw == "state" ? declared_state : kw == "noise" ? declared_noise : declared_control;
      if (slot) throw ParseError("duplicate '" + std::string(kw) + "' declaration", loc);
      slot = n;
    } else if (line.front() == 'B' && detail::trim(line.substr(1)).starts_with('=')) {
      if (declared_b) throw ParseError("duplicate B declaration", loc);
      const std::string_view rest = detail::trim(line.substr(1));
      declared_b = detail::parse_matrix_literal(rest.substr(1), loc);
    } else if (const auto eq = line.find('='); eq != std::string_view::npos) {
      std::string_view lhs = detail::trim(line.substr(0, eq));
      if (lhs.ends_with('\'')) lhs.remove_suffix(1);
      std::size_t idx = 0;
      const bool ok = lhs.size() >= 2 && (lhs.front() == 'x' || lhs.front() == 'f') &&
                      std::from_chars(lhs.data() + 1, lhs.data() + lhs.size(), idx).ptr ==
                          lhs.data() + lhs.size() &&
                      idx >= 1;
      if (!ok) throw ParseError("left-hand side must be x<i>' or f<i>", loc);
      if (equations.size() < idx) equations.resize(idx);
      if (equations[idx - 1]) {
        throw ParseError("duplicate equation for coordinate " + std::to_string(idx), loc);
      }
      std::size_t rhs_lead = 0;
      const std::string_view rhs = detail::trim(line.substr(eq + 1), &rhs_lead);
      equations[idx - 1] = RawLine{std::string(rhs), line_no, lead + eq + 2 + rhs_lead};
    } else {
      bare.push_back(RawLine{std::string(line), line_no, lead + 1});
    }
    if (end == text.size()) break;
  }

  if (!bare.empty() && !equations.empty()) {
    throw ParseError("bare expression mixed with x<i>' equations",
                     SourceLocation{bare.front().line, bare.front().column});
  }
  std::vector<RawLine> lines;
  if (!bare.empty()) {
    lines = bare;
  } else {
    for (std::size_t i = 0; i < equations.size(); ++i) {
      if (!equations[i]) {
        throw ParseError("missing equation for coordinate " + std::to_string(i + 1), {});
      }
      lines.push_back(*equations[i]);
    }
  }
  if (lines.empty()) throw ParseError("model has no equations", {line_no, 1});

  ModelSource src;
  src.state_dim = declared_state.value_or(lines.size());
  if (src.state_dim != lines.size()) {
    throw DimensionError("state dimension " + std::to_string(src.state_dim) + " declared but " +
                         std::to_string(lines.size()) + " equations given");
  }
  const ExprDims dims{src.state_dim, declared_noise.value_or(std::numeric_limits<std::size_t>::max())};
  std::size_t noise_used = 0;
  for (const RawLine& l : lines) {
    Expr e = parse_expression(l.text, dims, SourceLocation{l.line, l.column});
    noise_used = std::max(noise_used, detail::max_index(e, NodeKind::kNoise));
    src.equations.push_back(std::move(e));
  }
  src.noise_dim = declared_noise.value_or(noise_used);

  if (declared_b) {
    src.control_matrix = *declared_b;
    src.control_dim = static_cast<std::size_t>(declared_b->cols());
    if (declared_control && *declared_control != src.control_dim) {
      throw DimensionError("control dimension " + std::to_string(*declared_control) +
                           " declared but B has " + std::to_string(src.control_dim) + " columns");
    }
  } else {
    src.control_dim = declared_control.value_or(src.state_dim);
    if (src.control_dim != src.state_dim) {
      throw DimensionError("B must be given when control dimension differs from state dimension");
    }
    src.control_matrix = Matrix::Identity(static_cast<Eigen::Index>(src.state_dim),
                                          static_cast<Eigen::Index>(src.state_dim));
  }
  if (static_cast<std::size_t>(src.control_matrix.rows()) != src.state_dim) {
    throw DimensionError("B has " + std::to_string(src.control_matrix.rows()) +
                         " rows but the state dimension is " + std::to_string(src.state_dim));
  }
  return src;
}

/// Canonical text for a model; parse_model(print_model(m)) reproduces m.
inline std::string print_model(const ModelSource& m) {
  std::ostringstream out;
  out << "state " << m.state_dim << '\n';
  out << "noise " << m.noise_dim << '\n';
  out << "control " << m.control_dim << '\n';
  out << "B = [";
  for (Eigen::Index r = 0; r < m.control_matrix.rows(); ++r) {
    if (r) out << "; ";
    for (Eigen::Index c = 0; c < m.control_matrix.cols(); ++c) {
      if (c) out << ", ";
      const double v = m.control_matrix(r, c);
      out << (std::signbit(v) ? "-" : "") << detail::format_number(std::abs(v));
    }
  }
  out << "]\n";
  for (std::size_t i = 0; i < m.equations.size(); ++i) {
    out << 'x' << (i + 1) << "' = " << to_string(m.equations[i]) << '\n';
  }
  return out.str();
}

}  // namespace stabent

#endif  // STABENT_MODEL_SOURCE_HPP
