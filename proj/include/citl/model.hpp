#pragma once

// Single-hidden-layer random-weight model shared by the source and target
// estimators, plus its JSON file format.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "citl/data.hpp"
#include "citl/numcore.hpp"

namespace citl {

enum class Activation { Sigmoid, Tanh };
enum class ModelKind { Rscn, Citl };

inline const char* to_string(Activation a) { return a == Activation::Sigmoid ? "sigmoid" : "tanh"; }
inline const char* to_string(ModelKind k) { return k == ModelKind::Rscn ? "rscn" : "citl"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  throw Error(ErrorCode::InvalidConfig, "unknown activation '" + s + "'");
}

inline double activate(Activation a, double z) {
  return a == Activation::Sigmoid ? 1.0 / (1.0 + std::exp(-z)) : std::tanh(z);
}

struct ShallowModel {
  ModelKind kind = ModelKind::Rscn;
  Activation activation = Activation::Sigmoid;
  std::size_t d = 0;
  std::size_t m = 1;
  Matrix w;     // L×d input weights, one row per node
  Vector b;     // L biases
  Matrix beta;  // L×m output weights
  NormStats norm;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();

  std::size_t nodes() const noexcept { return b.size(); }

  /// Trainable parameters stored in the file: L·d + L + L·m.
  std::size_t parameter_count() const noexcept { return w.size() + b.size() + beta.size(); }
};

inline ShallowModel empty_model(ModelKind kind, Activation act, std::size_t d, std::size_t m) {
  ShallowModel model;
  model.kind = kind;
  model.activation = act;
  model.d = d;
  model.m = m;
  model.w = Matrix(0, d);
  model.beta = Matrix(0, m);
  return model;
}

/// Hidden-layer output, L×N: entry (j, i) = g(ω_j·x_i + b_j).
inline Matrix hidden_output(const Matrix& w, std::span<const double> b, Activation act, const Matrix& x) {
  if (w.rows() != b.size()) throw Error(ErrorCode::DimensionMismatch, "weights and biases disagree on L");
  if (w.rows() > 0 && w.cols() != x.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "input width does not match model dimension");
  }
  Matrix h(w.rows(), x.rows());
  for (std::size_t j = 0; j < w.rows(); ++j) {
    auto wj = w.row(j);
    for (std::size_t i = 0; i < x.rows(); ++i) h(j, i) = activate(act, dot(wj, x.row(i)) + b[j]);
  }
  return h;
}

/// Hidden output of one candidate node over the rows of x.
inline Vector node_output(std::span<const double> w, double b, Activation act, const Matrix& x) {
  Vector h(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) h[i] = activate(act, dot(w, x.row(i)) + b);
  return h;
}

/// N×m predictions Hᵀβ for inputs already normalized with model.norm.
inline Matrix predict(const ShallowModel& model, const Matrix& x) {
  if (x.cols() != model.d) throw Error(ErrorCode::DimensionMismatch, "input width does not match model dimension");
  Matrix out(x.rows(), model.m);
  if (model.nodes() == 0) return out;
  const Matrix h = hidden_output(model.w, model.b, model.activation, x);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t q = 0; q < model.m; ++q) {
      double s = 0.0;
      for (std::size_t j = 0; j < model.nodes(); ++j) s += h(j, i) * model.beta(j, q);
      out(i, q) = s;
    }
  return out;
}

/// Applies model.norm to raw features, then predicts.
inline Matrix predict_raw(const ShallowModel& model, const Matrix& raw_x) {
  return predict(model, apply_norm(raw_x, model.norm));
}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::ordered_json to_json(const ShallowModel& model) {
  using nlohmann::ordered_json;
  auto rows_of = [](const Matrix& m) {
    ordered_json arr = ordered_json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) arr.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return arr;
  };
  ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = to_string(model.kind);
  j["d"] = model.d;
  j["L"] = model.nodes();
  j["m"] = model.m;
  j["activation"] = to_string(model.activation);
  j["norm"] = {{"mean", model.norm.mean}, {"std", model.norm.std}};
  j["W"] = rows_of(model.w);
  j["b"] = model.b;
  j["beta"] = rows_of(model.beta);
  j["seed"] = model.seed;
  j["config"] = model.config;
  return j;
}

inline ShallowModel model_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::Parse, "unsupported model format_version");
    }
    ShallowModel model;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "rscn" && kind != "citl") throw Error(ErrorCode::Parse, "unknown model kind '" + kind + "'");
    model.kind = kind == "rscn" ? ModelKind::Rscn : ModelKind::Citl;
    model.activation = parse_activation(j.at("activation").get<std::string>());
    model.d = j.at("d").get<std::size_t>();
    model.m = j.at("m").get<std::size_t>();
    const auto L = j.at("L").get<std::size_t>();
    model.norm.mean = j.at("norm").at("mean").get<Vector>();
    model.norm.std = j.at("norm").at("std").get<Vector>();
    model.w = Matrix(0, model.d);
    for (const auto& row : j.at("W")) model.w.append_row(row.get<Vector>());
    model.b = j.at("b").get<Vector>();
    model.beta = Matrix(0, model.m);
    for (const auto& row : j.at("beta")) model.beta.append_row(row.get<Vector>());
    model.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("config")) model.config = j.at("config");
    if (model.w.rows() != L || model.b.size() != L || model.beta.rows() != L || model.norm.mean.size() != model.d ||
        model.norm.std.size() != model.d) {
      throw Error(ErrorCode::Parse, "model arrays disagree with declared shape");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed model file: ") + e.what());
  }
}

inline std::string serialize(const ShallowModel& model) { return to_json(model).dump(1) + "\n"; }

inline void save_model(const std::string& path, const ShallowModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << serialize(model);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

inline ShallowModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return model_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
}

}  // namespace citl
