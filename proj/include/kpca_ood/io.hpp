#pragma once

// On-disk formats. Every multi-byte field is little-endian regardless of the
// host byte order.
//
// Feature file (.oodf)
//   "OODF" | u8 version=1 | u32 rows | u32 cols | rows*cols f32, row-major
//
// Model file (.oodm)
//   "OODM" | u8 version=1 | u8 method (0 pca, 1 cop, 2 corp, 3 colp, 4 kcos, 5 kgau)
//   covariance methods (pca/cop/corp/colp):
//     u32 input_dim
//     corp/colp only: u8 kernel (0 gaussian, 1 laplacian) | f64 gamma | u32 M | u64 seed
//                     | M*input_dim f64 omegas, row-major | M f64 biases
//     u32 D | u32 q | f64 evr_target
//     D f64 mean | D*q f64 basis, column-major | D f64 eigenvalues
//     u8 has_residual | has_residual ? D*(D-q) f64 residual basis, column-major
//   kernel methods (kcos/kgau):
//     f64 gamma | f64 evr_target | u32 N | u32 m | u32 l
//     N*m f64 normalized training rows, row-major | N*l f64 A, column-major
//     N f64 Gram eigenvalues (descending)
//
// Score CSV
//   header "index,score", then one "<row>,<value>" line per row with values
//   printed to 17 significant digits.

#include <bit>
#include <cmath>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "kpca_ood/detector.hpp"
#include "kpca_ood/featmap.hpp"
#include "kpca_ood/kernelspace.hpp"
#include "kpca_ood/tensor.hpp"

namespace kpca_ood {

enum class Method : std::uint8_t { pca = 0, cop = 1, corp = 2, colp = 3, kcos = 4, kgau = 5 };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::pca: return "pca";
    case Method::cop: return "cop";
    case Method::corp: return "corp";
    case Method::colp: return "colp";
    case Method::kcos: return "kcos";
    case Method::kgau: return "kgau";
  }
  return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
  for (auto m : {Method::pca, Method::cop, Method::corp, Method::colp, Method::kcos, Method::kgau}) {
    if (s == method_name(m)) return m;
  }
  return std::nullopt;
}

inline bool is_kernel_method(Method m) { return m == Method::kcos || m == Method::kgau; }

// ---------------------------------------------------------------------------
// Byte buffers
// ---------------------------------------------------------------------------

class ByteWriter {
 public:
  void bytes(const char* s, std::size_t n) { buf_.insert(buf_.end(), s, s + n); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f64(p[i]);
  }
  void count(std::size_t n, const char* what) {
    if (n > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(Errc::format, std::string(what) + " exceeds the 32-bit header limit");
    }
    u32(static_cast<std::uint32_t>(n));
  }

  const std::string& str() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  void expect_magic(const char* magic) {
    need(4, "magic");
    if (data_.compare(pos_, 4, magic) != 0) throw Error(Errc::format, std::string("bad magic, expected ") + magic);
    pos_ += 4;
  }
  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void f64s(double* p, std::size_t n, const char* what) {
    if (n > remaining() / 8) throw Error(Errc::format, std::string("truncated ") + what);
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) throw Error(Errc::format, std::to_string(remaining()) + " trailing bytes");
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw Error(Errc::format, std::string("truncated file while reading ") + what);
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "short write to " + path);
}

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kFormatVersion = 1;

inline std::string encode_features(const FeatureMatrix& x) {
  ByteWriter w;
  w.bytes("OODF", 4);
  w.u8(kFormatVersion);
  w.count(x.rows(), "row count");
  w.count(x.cols(), "column count");
  for (double v : x.data()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw Error(Errc::non_finite, "value does not fit in float32");
    w.f32(f);
  }
  return w.str();
}

inline FeatureMatrix decode_features(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("OODF");
  if (const auto v = r.u8(); v != kFormatVersion) {
    throw Error(Errc::format, "unsupported feature file version " + std::to_string(v));
  }
  const std::size_t rows = r.u32(), cols = r.u32();
  if (rows == 0 || cols == 0) throw Error(Errc::format, "feature file has an empty shape");
  if (r.remaining() != rows * cols * 4) {
    throw Error(Errc::format, "payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                                  std::to_string(rows * cols * 4));
  }
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = r.f32();
  return FeatureMatrix(rows, cols, data);
}

inline FeatureMatrix load_features(const std::string& path) {
  try {
    return decode_features(read_file(path));
  } catch (const Error& e) {
    throw e.with_context(path);
  }
}

inline void save_features(const std::string& path, const FeatureMatrix& x) { write_file(path, encode_features(x)); }

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

using AnyModel = std::variant<DetectorModel, KernelSpaceModel>;

struct SavedModel {
  Method method = Method::pca;
  AnyModel model;
};

/// Method tag implied by a covariance model's feature map.
inline Method method_of(const DetectorModel& m) {
  const auto& st = m.map.stages();
  if (st.size() == 1 && std::holds_alternative<IdentityStage>(st[0])) return Method::pca;
  if (st.size() == 1 && std::holds_alternative<CosineStage>(st[0])) return Method::cop;
  if (st.size() == 2 && std::holds_alternative<CosineStage>(st[0]) && std::holds_alternative<RffMap>(st[1])) {
    return std::get<RffMap>(st[1]).kind() == KernelKind::gaussian ? Method::corp : Method::colp;
  }
  throw Error(Errc::invalid_spec, "feature map has no model-file method tag");
}

inline Method method_of(const KernelSpaceModel& m) {
  return m.kind == GramKernel::cosine ? Method::kcos : Method::kgau;
}

inline std::string encode_model(const AnyModel& any) {
  ByteWriter w;
  w.bytes("OODM", 4);
  w.u8(kFormatVersion);
  if (const auto* m = std::get_if<DetectorModel>(&any)) {
    const Method method = method_of(*m);
    w.u8(static_cast<std::uint8_t>(method));
    w.count(m->map.input_dim(), "input dimension");
    if (const RffMap* rff = m->map.rff()) {
      w.u8(static_cast<std::uint8_t>(rff->kind()));
      w.f64(rff->gamma());
      w.count(rff->features(), "RFF dimension");
      w.u64(rff->seed());
      w.f64s(rff->omegas().data(), static_cast<std::size_t>(rff->omegas().size()));
      w.f64s(rff->biases().data(), static_cast<std::size_t>(rff->biases().size()));
    }
    const std::size_t d = m->mapped_dim();
    w.count(d, "mapped dimension");
    w.count(m->q, "q");
    w.f64(m->evr_target);
    w.f64s(m->mean.data(), d);
    w.f64s(m->basis.data(), static_cast<std::size_t>(m->basis.size()));
    w.f64s(m->eigenvalues.data(), static_cast<std::size_t>(m->eigenvalues.size()));
    w.u8(m->residual_basis ? 1 : 0);
    if (m->residual_basis) w.f64s(m->residual_basis->data(), static_cast<std::size_t>(m->residual_basis->size()));
  } else {
    const auto& k = std::get<KernelSpaceModel>(any);
    w.u8(static_cast<std::uint8_t>(method_of(k)));
    w.f64(k.gamma);
    w.f64(k.evr_target);
    w.count(k.train.rows(), "training rows");
    w.count(k.train.cols(), "training columns");
    w.count(k.l, "residual dimension");
    w.f64s(k.train.data().data(), k.train.data().size());
    w.f64s(k.residual_vectors.data(), static_cast<std::size_t>(k.residual_vectors.size()));
    w.f64s(k.gram_eigenvalues.data(), static_cast<std::size_t>(k.gram_eigenvalues.size()));
  }
  return w.str();
}

inline SavedModel decode_model(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("OODM");
  if (const auto v = r.u8(); v != kFormatVersion) {
    throw Error(Errc::format, "unsupported model file version " + std::to_string(v));
  }
  const std::uint8_t tag = r.u8();
  if (tag > static_cast<std::uint8_t>(Method::kgau)) throw Error(Errc::format, "unknown method tag");
  const auto method = static_cast<Method>(tag);
  auto checked = [&](std::size_t a, std::size_t b, const char* what) {
    if (b != 0 && a > r.remaining() / 8 / b) throw Error(Errc::format, std::string("truncated ") + what);
    return a * b;
  };

  SavedModel out;
  out.method = method;
  if (!is_kernel_method(method)) {
    DetectorModel m;
    const std::size_t input_dim = r.u32();
    if (input_dim == 0) throw Error(Errc::format, "zero input dimension");
    if (method == Method::pca) {
      m.map = FeatureMapSpec::identity(input_dim);
    } else if (method == Method::cop) {
      m.map = FeatureMapSpec::cosine(input_dim);
    } else {
      const std::uint8_t kind = r.u8();
      if (kind > 1) throw Error(Errc::format, "unknown RFF kernel");
      if ((kind == 0) != (method == Method::corp)) throw Error(Errc::format, "RFF kernel does not match method tag");
      const double gamma = r.f64();
      const std::size_t features = r.u32();
      const std::uint64_t seed = r.u64();
      if (features == 0) throw Error(Errc::format, "zero RFF dimension");
      RowMatrix omegas(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(input_dim));
      r.f64s(omegas.data(), checked(features, input_dim, "omegas"), "omegas");
      Vector biases(static_cast<Eigen::Index>(features));
      r.f64s(biases.data(), features, "biases");
      m.map = FeatureMapSpec::cosine_rff(
          RffMap(static_cast<KernelKind>(kind), gamma, seed, std::move(omegas), std::move(biases)));
    }
    const std::size_t d = r.u32(), q = r.u32();
    if (d != m.map.output_dim()) throw Error(Errc::format, "mapped dimension does not match feature map");
    if (q < 1 || q > d) throw Error(Errc::format, "q outside [1, D]");
    m.q = q;
    m.evr_target = r.f64();
    m.mean.resize(Eigen::Index(d));
    r.f64s(m.mean.data(), d, "mean");
    m.basis.resize(Eigen::Index(d), Eigen::Index(q));
    r.f64s(m.basis.data(), checked(d, q, "basis"), "basis");
    m.eigenvalues.resize(Eigen::Index(d));
    r.f64s(m.eigenvalues.data(), d, "eigenvalues");
    const std::uint8_t has_residual = r.u8();
    if (has_residual > 1) throw Error(Errc::format, "bad residual flag");
    if (has_residual) {
      Matrix res(Eigen::Index(d), Eigen::Index(d - q));
      r.f64s(res.data(), checked(d, d - q, "residual basis"), "residual basis");
      m.residual_basis = std::move(res);
    }
    out.model = std::move(m);
  } else {
    KernelSpaceModel k;
    k.kind = method == Method::kcos ? GramKernel::cosine : GramKernel::gaussian_normalized;
    k.gamma = r.f64();
    k.evr_target = r.f64();
    const std::size_t n = r.u32(), cols = r.u32(), l = r.u32();
    if (n == 0 || cols == 0 || l < 1 || l > n) throw Error(Errc::format, "bad kernel-space shape");
    if (k.kind == GramKernel::gaussian_normalized && !(k.gamma > 0.0)) throw Error(Errc::format, "bad gamma");
    std::vector<double> train(checked(n, cols, "training rows"));
    r.f64s(train.data(), train.size(), "training rows");
    k.train = FeatureMatrix(n, cols, train);
    k.l = l;
    k.residual_vectors.resize(Eigen::Index(n), Eigen::Index(l));
    r.f64s(k.residual_vectors.data(), checked(n, l, "residual vectors"), "residual vectors");
    k.gram_eigenvalues.resize(Eigen::Index(n));
    r.f64s(k.gram_eigenvalues.data(), n, "Gram eigenvalues");
    out.model = std::move(k);
  }
  r.expect_end();
  return out;
}

inline SavedModel load_model(const std::string& path) {
  try {
    return decode_model(read_file(path));
  } catch (const Error& e) {
    throw e.with_context(path);
  }
}

inline void save_model(const std::string& path, const AnyModel& m) { write_file(path, encode_model(m)); }

// ---------------------------------------------------------------------------
// Score CSV
// ---------------------------------------------------------------------------

struct ScoreTable {
  std::vector<std::size_t> index;
  std::vector<double> score;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string encode_scores(const ScoreTable& t) {
  if (t.index.size() != t.score.size()) throw Error(Errc::length_mismatch, "index/score length mismatch");
  std::string out = "index,score\n";
  for (std::size_t i = 0; i < t.index.size(); ++i) {
    out += std::to_string(t.index[i]);
    out += ',';
    out += format_double(t.score[i]);
    out += '\n';
  }
  return out;
}

inline ScoreTable sequential_scores(std::vector<double> values) {
  ScoreTable t;
  t.index.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) t.index[i] = i;
  t.score = std::move(values);
  return t;
}

inline ScoreTable decode_scores(const std::string& text, const std::string& label = "scores") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::format, label + ": empty score file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,score") throw Error(Errc::format, label + ": expected header 'index,score'");
  ScoreTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(Errc::format, label + ": line " + std::to_string(lineno) + " has no comma");
    const std::string idx = line.substr(0, comma), val = line.substr(comma + 1);
    char* end = nullptr;
    errno = 0;
    const unsigned long long i = std::strtoull(idx.c_str(), &end, 10);
    if (idx.empty() || *end != '\0' || errno != 0) {
      throw Error(Errc::format, label + ": bad index on line " + std::to_string(lineno));
    }
    const double v = std::strtod(val.c_str(), &end);
    if (val.empty() || *end != '\0' || !std::isfinite(v)) {
      throw Error(Errc::format, label + ": bad score on line " + std::to_string(lineno));
    }
    t.index.push_back(static_cast<std::size_t>(i));
    t.score.push_back(v);
  }
  return t;
}

inline ScoreTable load_scores(const std::string& path) { return decode_scores(read_file(path), path); }

inline void save_scores(const std::string& path, const ScoreTable& t) { write_file(path, encode_scores(t)); }

}  // namespace kpca_ood
