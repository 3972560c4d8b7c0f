#pragma once

// Plain-text model files.
//
//   dpo-model 1
//   kind qubo|ising
//   n <variables>
//   offset <real>
//   integer 0|1            1 for quantized Ising models
//   scale <real>           quantization scale (1 unless integer)
//   degenerate 0|1         quantized from an all-zero source
//   blocks <k> <b0> <e0> ... (half-open ranges; "blocks 0" when unpartitioned)
//   entries <count>
//   <i> <j> <value>        one line per nonzero, i <= j
//   end
//
// For kind qubo an entry (i, j) is Q_ij = Q_ji. For kind ising, (i, i) is
// the linear field h_i and (i, j) with i < j the coupling J_ij. Reals are
// written with 17 significant digits, so reading back restores every
// coefficient exactly. Lines starting with '#' are ignored.

#include "dpo/precision.hpp"
#include "dpo/qubo.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dpo {

class ModelFormatError : public std::runtime_error {
 public:
  ModelFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("model file line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

using AnyModel = std::variant<Qubo, IsingModel, QuantizedIsing>;

namespace detail {

inline void write_header(std::ostream& os, const char* kind, std::size_t n, double offset,
                         bool integer, double scale, bool degenerate,
                         const std::optional<BlockPartition>& partition) {
  os << "dpo-model 1\n"
     << "kind " << kind << '\n'
     << "n " << n << '\n'
     << "offset " << offset << '\n'
     << "integer " << (integer ? 1 : 0) << '\n'
     << "scale " << scale << '\n'
     << "degenerate " << (degenerate ? 1 : 0) << '\n';
  os << "blocks " << (partition ? partition->num_blocks() : 0);
  if (partition) {
    for (const auto& r : partition->blocks()) os << ' ' << r.begin << ' ' << r.end;
  }
  os << '\n';
}

struct Triplet {
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;
};

inline void write_entries(std::ostream& os, const std::vector<Triplet>& entries) {
  os << "entries " << entries.size() << '\n';
  for (const auto& e : entries) os << e.i << ' ' << e.j << ' ' << e.value << '\n';
  os << "end\n";
}

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  std::istringstream next(const std::string& key) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      if (key.empty()) return ss;
      std::string k;
      ss >> k;
      if (k != key) fail("expected '" + key + "', found '" + k + "'");
      return ss;
    }
    fail("unexpected end of file (expected '" + key + "')");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ModelFormatError(line_no_, what);
  }

  template <typename T>
  T read(std::istringstream& ss, const char* what) {
    std::string tok;
    if (!(ss >> tok)) fail(std::string("missing ") + what);
    T v{};
    const auto* end = tok.data() + tok.size();
    const auto r = std::from_chars(tok.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end) fail(std::string("malformed ") + what + " '" + tok + "'");
    return v;
  }

  void expect_end(std::istringstream& ss) {
    std::string extra;
    if (ss >> extra) fail("trailing token '" + extra + "'");
  }

 private:
  std::istream& is_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

inline void write_model(std::ostream& os, const Qubo& q) {
  const auto prec = os.precision(17);
  detail::write_header(os, "qubo", q.n(), q.offset(), false, 1.0, false, q.partition());
  std::vector<detail::Triplet> entries;
  const auto& Q = q.coeffs();
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    for (Eigen::Index j = i; j < Q.cols(); ++j) {
      if (Q(i, j) != 0.0) entries.push_back({std::size_t(i), std::size_t(j), Q(i, j)});
    }
  }
  detail::write_entries(os, entries);
  os.precision(prec);
}

namespace detail {

inline void write_ising(std::ostream& os, const Eigen::VectorXd& h, const Eigen::MatrixXd& J,
                        double offset, bool integer, double scale, bool degenerate,
                        const std::optional<BlockPartition>& partition) {
  const auto prec = os.precision(17);
  write_header(os, "ising", std::size_t(h.size()), offset, integer, scale, degenerate,
               partition);
  std::vector<Triplet> entries;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (h[i] != 0.0) entries.push_back({std::size_t(i), std::size_t(i), h[i]});
    for (Eigen::Index j = i + 1; j < h.size(); ++j) {
      if (J(i, j) != 0.0) entries.push_back({std::size_t(i), std::size_t(j), J(i, j)});
    }
  }
  write_entries(os, entries);
  os.precision(prec);
}

}  // namespace detail

inline void write_model(std::ostream& os, const IsingModel& m,
                        const std::optional<BlockPartition>& partition = std::nullopt) {
  detail::write_ising(os, m.linear(), m.quadratic(), m.offset(), false, 1.0, false, partition);
}

inline void write_model(std::ostream& os, const QuantizedIsing& m,
                        const std::optional<BlockPartition>& partition = std::nullopt) {
  m.validate();
  detail::write_ising(os, m.linear.cast<double>(), m.quadratic.cast<double>(), 0.0, true,
                      m.scale, m.degenerate, partition);
}

inline AnyModel read_model(std::istream& is) {
  detail::LineReader r(is);
  {
    auto ss = r.next("dpo-model");
    if (r.read<int>(ss, "version") != 1) r.fail("unsupported format version");
    r.expect_end(ss);
  }
  std::string kind;
  {
    auto ss = r.next("kind");
    ss >> kind;
    if (kind != "qubo" && kind != "ising") r.fail("unknown kind '" + kind + "'");
    r.expect_end(ss);
  }
  auto scalar = [&r](const char* key, auto tag) {
    auto ss = r.next(key);
    auto v = r.read<decltype(tag)>(ss, key);
    r.expect_end(ss);
    return v;
  };
  const auto n = scalar("n", std::size_t{});
  const double offset = scalar("offset", double{});
  const int integer = scalar("integer", int{});
  const double scale = scalar("scale", double{});
  const int degenerate = scalar("degenerate", int{});
  if ((integer != 0 && integer != 1) || (degenerate != 0 && degenerate != 1)) {
    r.fail("flags must be 0 or 1");
  }
  if (integer && kind != "ising") r.fail("integer flag is only valid for kind ising");

  std::optional<BlockPartition> partition;
  {
    auto ss = r.next("blocks");
    const auto k = r.read<std::size_t>(ss, "block count");
    if (k > 0) {
      std::vector<IndexRange> ranges;
      std::size_t expect = 0;
      for (std::size_t b = 0; b < k; ++b) {
        const auto begin = r.read<std::size_t>(ss, "block begin");
        const auto end = r.read<std::size_t>(ss, "block end");
        if (begin != expect || end <= begin) r.fail("blocks must be contiguous and non-empty");
        ranges.push_back({begin, end});
        expect = end;
      }
      if (expect != n) r.fail("blocks do not cover all variables");
      partition = BlockPartition(std::move(ranges));
    }
    r.expect_end(ss);
  }

  const auto count = scalar("entries", std::size_t{});
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  Eigen::VectorXd h = Eigen::VectorXd::Zero(Eigen::Index(n));
  for (std::size_t e = 0; e < count; ++e) {
    auto ss = r.next("");
    const auto i = r.read<std::size_t>(ss, "row index");
    const auto j = r.read<std::size_t>(ss, "column index");
    const double v = r.read<double>(ss, "value");
    r.expect_end(ss);
    if (i > j || j >= n) r.fail("entry index out of range or below the diagonal");
    if (!std::isfinite(v)) r.fail("non-finite coefficient");
    if (kind == "ising" && i == j) {
      h[Eigen::Index(i)] = v;
    } else {
      M(Eigen::Index(i), Eigen::Index(j)) = v;
      M(Eigen::Index(j), Eigen::Index(i)) = v;
    }
  }
  { auto ss = r.next("end"); r.expect_end(ss); }

  if (kind == "qubo") return Qubo(std::move(M), offset, std::move(partition));
  if (!integer) return IsingModel(std::move(h), std::move(M), offset);
  if (offset != 0.0) r.fail("quantized models carry no offset");
  QuantizedIsing qi;
  auto to_int = [&r](double v) {
    if (v != std::round(v) || v < -128.0 || v > 127.0) r.fail("integer coefficient out of int8");
    return int(v);
  };
  qi.linear = h.unaryExpr(to_int);
  qi.quadratic = M.unaryExpr(to_int);
  qi.scale = scale;
  qi.degenerate = degenerate == 1;
  qi.validate();
  return qi;
}

template <typename Model>
void save_model(const std::string& path, const Model& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_model(os, m);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

inline AnyModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return read_model(is);
}

}  // namespace dpo
