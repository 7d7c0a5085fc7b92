// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The fibereq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fibereq/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fibereq/csv.hpp"

namespace fibereq {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

using nlohmann::json;

namespace {

constexpr char kDatasetMagic[8] = {'F', 'I', 'B', 'E', 'R', 'E', 'Q', 'D'};
constexpr char kWeightsMagic[8] = {'F', 'I', 'B', 'E', 'R', 'E', 'Q', 'W'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.append(c, n);
  }
  template <typename T>
  void pod(const T& v) { raw(&v, sizeof(T)); }
  void cvec(const CVec& v) { raw(v.data(), v.size() * sizeof(cplx)); }
  void bits(const Bits& b) { raw(b.data(), b.size()); }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path);
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) throw IoError(path_ + ": truncated file");
  }
  template <typename T>
  T pod() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  CVec cvec(std::size_t n) {
    CVec v(n);
    raw(v.data(), n * sizeof(cplx));
    return v;
  }
  Bits bits(std::size_t n) {
    Bits b(n);
    raw(b.data(), n);
    return b;
  }
  json header(const char (&magic)[8], std::uint32_t version) {
    char m[8];
    raw(m, 8);
    if (std::memcmp(m, magic, 8) != 0) throw IoError(path_ + ": bad magic");
    const auto v = pod<std::uint32_t>();
    if (v != version) throw IoError(path_ + ": unsupported version " + std::to_string(v));
    const auto len = pod<std::uint64_t>();
    if (len > (std::uint64_t{1} << 30)) throw IoError(path_ + ": header too large");
    std::string text(len, '\0');
    raw(text.data(), len);
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw IoError(path_ + ": malformed header: " + e.what());
    }
  }

 private:
  std::string path_;
  std::ifstream in_;
};

void write_header(Writer& w, const char (&magic)[8], std::uint32_t version, const json& j) {
  const std::string text = j.dump();
  w.raw(magic, 8);
  w.pod(version);
  w.pod(static_cast<std::uint64_t>(text.size()));
  w.raw(text.data(), text.size());
}

template <typename T>
T field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw IoError(ctx + ": missing field " + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(ctx + ": bad field " + key + ": " + e.what());
  }
}

json link_to_json(const FiberLinkParams& l) {
  return {{"alpha_db_per_km", l.alpha_db_per_km}, {"dispersion_ps_nm_km", l.dispersion_ps_nm_km},
          {"gamma_w_km", l.gamma_w_km},           {"lambda_nm", l.lambda_nm},
          {"span_km", l.span_km},                 {"n_spans", l.n_spans},
          {"edfa_nf_db", l.edfa_nf_db},           {"step_km", l.step_km}};
}

FiberLinkParams link_from_json(const json& j, const std::string& ctx) {
  FiberLinkParams l;
  l.alpha_db_per_km = field<double>(j, "alpha_db_per_km", ctx);
  l.dispersion_ps_nm_km = field<double>(j, "dispersion_ps_nm_km", ctx);
  l.gamma_w_km = field<double>(j, "gamma_w_km", ctx);
  l.lambda_nm = field<double>(j, "lambda_nm", ctx);
  l.span_km = field<double>(j, "span_km", ctx);
  l.n_spans = field<int>(j, "n_spans", ctx);
  l.edfa_nf_db = field<double>(j, "edfa_nf_db", ctx);
  l.step_km = field<double>(j, "step_km", ctx);
  return l;
}

json meta_to_json(const DatasetMeta& m) {
  return {{"link", link_to_json(m.link)},
          {"launch_power_dbm", m.launch_power_dbm},
          {"symbol_rate_bd", m.symbol_rate_bd},
          {"rolloff", m.rolloff},
          {"sps", m.sps},
          {"bit_seed", m.bit_seed},
          {"ase_seed", m.ase_seed},
          {"noise_seed", m.noise_seed},
          {"noise_sigma", m.noise_sigma},
          {"guard", m.guard},
          {"train", m.train},
          {"validation", m.validation},
          {"test", m.test}};
}

DatasetMeta meta_from_json(const json& j, const std::string& ctx) {
  DatasetMeta m;
  m.link = link_from_json(field<json>(j, "link", ctx), ctx);
  m.launch_power_dbm = field<double>(j, "launch_power_dbm", ctx);
  m.symbol_rate_bd = field<double>(j, "symbol_rate_bd", ctx);
  m.rolloff = field<double>(j, "rolloff", ctx);
  m.sps = field<int>(j, "sps", ctx);
  m.bit_seed = field<std::uint64_t>(j, "bit_seed", ctx);
  m.ase_seed = field<std::uint64_t>(j, "ase_seed", ctx);
  m.noise_seed = field<std::uint64_t>(j, "noise_seed", ctx);
  m.noise_sigma = field<double>(j, "noise_sigma", ctx);
  m.guard = field<std::size_t>(j, "guard", ctx);
  m.train = field<std::size_t>(j, "train", ctx);
  m.validation = field<std::size_t>(j, "validation", ctx);
  m.test = field<std::size_t>(j, "test", ctx);
  return m;
}

json spec_json(const act::ActivationSpec& s) {
  json j{{"function", act::to_string(s.function)}, {"kind", act::to_string(s.kind())}};
  switch (s.kind()) {
    case act::Kind::Exact:
      break;
    case act::Kind::Taylor: {
      const auto& p = std::get<act::TaylorParams>(s.params);
      j["order"] = p.order;
      j["boundary"] = p.boundary;
      j["coefficients"] = p.coefficients;
      break;
    }
    case act::Kind::Pwl: {
      json segs = json::array();
      for (const auto& g : std::get<act::PwlParams>(s.params).segments) {
        // JSON has no infinities; the open ends are implied by position.
        segs.push_back({std::isinf(g.lo) ? json(nullptr) : json(g.lo),
                        std::isinf(g.hi) ? json(nullptr) : json(g.hi), g.slope, g.intercept});
      }
      j["segments"] = segs;
      break;
    }
    case act::Kind::Lut: {
      const auto& p = std::get<act::LutParams>(s.params);
      j["n_bits"] = p.n_bits;
      j["x_min"] = p.x_min;
      j["x_max"] = p.x_max;
      j["values"] = p.values;
      j["grad_values"] = p.grad_values;
      break;
    }
  }
  return j;
}

act::ActivationSpec spec_from(const json& j, const std::string& ctx) {
  act::ActivationSpec s;
  try {
    s.function = act::function_from_string(field<std::string>(j, "function", ctx));
    const act::Kind kind = act::kind_from_string(field<std::string>(j, "kind", ctx));
    switch (kind) {
      case act::Kind::Exact:
        s.params = act::ExactParams{};
        break;
      case act::Kind::Taylor:
        s.params = act::TaylorParams{field<int>(j, "order", ctx), field<double>(j, "boundary", ctx),
                                     field<std::vector<double>>(j, "coefficients", ctx)};
        break;
      case act::Kind::Pwl: {
        act::PwlParams p;
        for (const auto& g : field<json>(j, "segments", ctx)) {
          if (!g.is_array() || g.size() != 4) throw IoError(ctx + ": bad PWL segment");
          const double inf = std::numeric_limits<double>::infinity();
          p.segments.push_back({g[0].is_null() ? -inf : g[0].get<double>(),
                                g[1].is_null() ? inf : g[1].get<double>(), g[2].get<double>(),
                                g[3].get<double>()});
        }
        s.params = std::move(p);
        break;
      }
      case act::Kind::Lut: {
        act::LutParams p;
        p.n_bits = field<int>(j, "n_bits", ctx);
        p.x_min = field<double>(j, "x_min", ctx);
        p.x_max = field<double>(j, "x_max", ctx);
        p.values = field<std::vector<double>>(j, "values", ctx);
        p.grad_values = field<std::vector<double>>(j, "grad_values", ctx);
        s.params = std::move(p);
        break;
      }
    }
    s.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(ctx + ": invalid activation spec: " + e.what());
  }
  return s;
}

json model_header(nn::Architecture arch, const nn::ModelDims& d, const act::ActivationSet& a,
                  const std::vector<std::string>& names,
                  const std::vector<std::pair<int, int>>& shapes) {
  json tensors = json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    tensors.push_back({{"name", names[i]}, {"rows", shapes[i].first}, {"cols", shapes[i].second}});
  }
  return {{"architecture", nn::to_string(arch)},
          {"dims",
           {{"features", d.features},
            {"window", d.window},
            {"hidden", d.hidden},
            {"hidden_kernel", d.hidden_kernel},
            {"out_kernel", d.out_kernel},
            {"outputs", d.outputs}}},
          {"activations", {{"tanh", spec_json(a.tanh)}, {"sigmoid", spec_json(a.sigmoid)}}},
          {"tensors", tensors}};
}

struct ModelHeader {
  nn::EqualizerModel shell;  // zero tensors of the right shapes
  std::optional<int> frac_bits;
};

ModelHeader parse_model_header(const json& j, const std::string& ctx) {
  ModelHeader h;
  nn::ModelDims d;
  const json& jd = field<json>(j, "dims", ctx);
  d.features = field<int>(jd, "features", ctx);
  d.window = field<int>(jd, "window", ctx);
  d.hidden = field<int>(jd, "hidden", ctx);
  d.hidden_kernel = field<int>(jd, "hidden_kernel", ctx);
  d.out_kernel = field<int>(jd, "out_kernel", ctx);
  d.outputs = field<int>(jd, "outputs", ctx);
  try {
    d.validate();
    const auto arch = nn::architecture_from_string(field<std::string>(j, "architecture", ctx));
    h.shell = nn::EqualizerModel::zeros(arch, d);
  } catch (const InvalidArgument& e) {
    throw IoError(ctx + ": " + e.what());
  }
  const json& ja = field<json>(j, "activations", ctx);
  h.shell.activations.tanh = spec_from(field<json>(ja, "tanh", ctx), ctx);
  h.shell.activations.sigmoid = spec_from(field<json>(ja, "sigmoid", ctx), ctx);
  const auto names = h.shell.tensor_names();
  const json& jt = field<json>(j, "tensors", ctx);
  if (!jt.is_array() || jt.size() != names.size()) throw IoError(ctx + ": tensor count mismatch");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (field<std::string>(jt[i], "name", ctx) != names[i] ||
        field<int>(jt[i], "rows", ctx) != h.shell.tensors[i].rows() ||
        field<int>(jt[i], "cols", ctx) != h.shell.tensors[i].cols()) {
      throw IoError(ctx + ": tensor " + names[i] + " does not match the architecture");
    }
  }
  if (j.contains("frac_bits")) h.frac_bits = field<int>(j, "frac_bits", ctx);
  return h;
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

std::pair<std::size_t, std::size_t> DatasetMeta::range(Split s) const {
  switch (s) {
    case Split::Train: return {guard, train};
    case Split::Validation: return {guard + train, validation};
    case Split::Test: return {guard + train + validation, test};
  }
  return {0, 0};
}

void DatasetMeta::validate(std::size_t n_symbols) const {
  link.validate();
  require(train > 0 && validation > 0 && test > 0, "dataset splits must be non-empty");
  require(guard + train + validation + test + guard <= n_symbols,
          "splits plus guards exceed the symbol count");
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise sigma must be >= 0");
  require(sps >= 2, "sps must be >= 2");
}

nn::SequenceData Dataset::sequence(Split s) const {
  const auto [begin, count] = meta.range(s);
  return nn::SequenceData::from_blocks(received, transmitted, begin, count);
}

void save_dataset(const std::string& path, const Dataset& ds) {
  const std::size_t n = ds.transmitted.size();
  require(n > 0, "empty dataset");
  require(ds.received.size() == n && ds.transmitted.v.size() == n && ds.received.v.size() == n,
          "dataset blocks differ in length");
  require(ds.transmitted.bits_h.size() == n * kBitsPerSymbol &&
              ds.transmitted.bits_v.size() == n * kBitsPerSymbol,
          "dataset bits missing");
  ds.meta.validate(n);
  json h = meta_to_json(ds.meta);
  h["n_symbols"] = n;
  h["has_waveform"] = ds.waveform.has_value();
  if (ds.waveform) {
    h["waveform_samples"] = ds.waveform->size();
    h["waveform_sample_rate_hz"] = ds.waveform->sample_rate_hz;
    h["waveform_symbol_rate_bd"] = ds.waveform->symbol_rate_bd;
  }
  Writer w;
  write_header(w, kDatasetMagic, kDatasetVersion, h);
  w.cvec(ds.transmitted.h);
  w.cvec(ds.transmitted.v);
  w.bits(ds.transmitted.bits_h);
  w.bits(ds.transmitted.bits_v);
  w.cvec(ds.received.h);
  w.cvec(ds.received.v);
  if (ds.waveform) {
    w.cvec(ds.waveform->h);
    w.cvec(ds.waveform->v);
  }
  write_file_atomic(path, w.data());
}

DatasetMeta load_dataset_meta(const std::string& path) {
  Reader r(path);
  return meta_from_json(r.header(kDatasetMagic, kDatasetVersion), path);
}

Dataset load_dataset(const std::string& path) {
  Reader r(path);
  const json h = r.header(kDatasetMagic, kDatasetVersion);
  Dataset ds;
  ds.meta = meta_from_json(h, path);
  const auto n = field<std::size_t>(h, "n_symbols", path);
  if (n == 0) throw IoError(path + ": empty dataset");
  try {
    ds.meta.validate(n);
  } catch (const InvalidArgument& e) {
    throw IoError(path + ": " + e.what());
  }
  ds.transmitted.symbol_rate_bd = ds.received.symbol_rate_bd = ds.meta.symbol_rate_bd;
  ds.transmitted.h = r.cvec(n);
  ds.transmitted.v = r.cvec(n);
  ds.transmitted.bits_h = r.bits(n * kBitsPerSymbol);
  ds.transmitted.bits_v = r.bits(n * kBitsPerSymbol);
  ds.received.h = r.cvec(n);
  ds.received.v = r.cvec(n);
  ds.received.bits_h = ds.transmitted.bits_h;
  ds.received.bits_v = ds.transmitted.bits_v;
  if (field<bool>(h, "has_waveform", path)) {
    const auto m = field<std::size_t>(h, "waveform_samples", path);
    SignalFrame f;
    f.sample_rate_hz = field<double>(h, "waveform_sample_rate_hz", path);
    f.symbol_rate_bd = field<double>(h, "waveform_symbol_rate_bd", path);
    f.h = r.cvec(m);
    f.v = r.cvec(m);
    ds.waveform = std::move(f);
  }
  return ds;
}

namespace {

void save_weights(const std::string& path, json header, const std::vector<const void*>& data,
                  const std::vector<std::size_t>& bytes) {
  Writer w;
  write_header(w, kWeightsMagic, kWeightsVersion, header);
  for (std::size_t i = 0; i < data.size(); ++i) w.raw(data[i], bytes[i]);
  write_file_atomic(path, w.data());
}

}  // namespace

void save_model(const std::string& path, const nn::EqualizerModel& model) {
  model.validate();
  json h = model_header(model.architecture, model.dims, model.activations, model.tensor_names(),
                        model.tensor_shapes());
  std::vector<const void*> data;
  std::vector<std::size_t> bytes;
  for (const auto& t : model.tensors) {
    data.push_back(t.data());
    bytes.push_back(static_cast<std::size_t>(t.size()) * sizeof(double));
  }
  save_weights(path, std::move(h), data, bytes);
}

nn::EqualizerModel load_model(const std::string& path) {
  Reader r(path);
  ModelHeader h = parse_model_header(r.header(kWeightsMagic, kWeightsVersion), path);
  if (h.frac_bits) throw IoError(path + ": holds a fixed-point model");
  for (auto& t : h.shell.tensors) r.raw(t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
  return std::move(h.shell);
}

void save_fixed_model(const std::string& path, const fx::FixedPointModel& model) {
  const auto names = nn::EqualizerModel::zeros(model.architecture, model.dims).tensor_names();
  std::vector<std::pair<int, int>> shapes;
  std::vector<const void*> data;
  std::vector<std::size_t> bytes;
  require(model.tensors.size() == names.size(), "tensor count does not match the architecture");
  for (const auto& t : model.tensors) {
    shapes.emplace_back(t.rows, t.cols);
    data.push_back(t.data.data());
    bytes.push_back(t.data.size() * sizeof(std::int32_t));
  }
  json h = model_header(model.architecture, model.dims, model.activations, names, shapes);
  h["frac_bits"] = model.frac_bits;
  save_weights(path, std::move(h), data, bytes);
}

fx::FixedPointModel load_fixed_model(const std::string& path) {
  Reader r(path);
  ModelHeader h = parse_model_header(r.header(kWeightsMagic, kWeightsVersion), path);
  if (!h.frac_bits) throw IoError(path + ": holds a floating-point model");
  fx::FixedPointModel m;
  m.architecture = h.shell.architecture;
  m.dims = h.shell.dims;
  m.activations = h.shell.activations;
  m.frac_bits = *h.frac_bits;
  for (const auto& t : h.shell.tensors) {
    fx::QuantizedTensor q;
    q.rows = static_cast<int>(t.rows());
    q.cols = static_cast<int>(t.cols());
    q.data.resize(static_cast<std::size_t>(t.size()));
    r.raw(q.data.data(), q.data.size() * sizeof(std::int32_t));
    m.tensors.push_back(std::move(q));
  }
  return m;
}

bool is_fixed_model_file(const std::string& path) {
  Reader r(path);
  return r.header(kWeightsMagic, kWeightsVersion).contains("frac_bits");
}

std::string activation_to_json(const act::ActivationSpec& spec) { return spec_json(spec).dump(); }

act::ActivationSpec activation_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text), "activation");
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed activation JSON: ") + e.what());
  }
}

std::string activation_to_csv(const act::ActivationSpec& spec) {
  spec.validate();
  std::ostringstream os;
  os << csv_schema_line() << '\n';
  const std::string fn = act::to_string(spec.function);
  switch (spec.kind()) {
    case act::Kind::Exact:
      throw InvalidArgument("an exact activation has no coefficient table");
    case act::Kind::Taylor: {
      const auto& p = std::get<act::TaylorParams>(spec.params);
      os << "function,order,boundary,power,coefficient\n";
      for (std::size_t k = 0; k < p.coefficients.size(); ++k) {
        os << fn << ',' << p.order << ',' << format_double(p.boundary) << ',' << k << ','
           << format_double(p.coefficients[k]) << '\n';
      }
      break;
    }
    case act::Kind::Pwl:
      os << "function,lo,hi,slope,intercept\n";
      for (const auto& s : std::get<act::PwlParams>(spec.params).segments) {
        os << fn << ',' << format_double(s.lo) << ',' << format_double(s.hi) << ','
           << format_double(s.slope) << ',' << format_double(s.intercept) << '\n';
      }
      break;
    case act::Kind::Lut: {
      const auto& p = std::get<act::LutParams>(spec.params);
      os << "function,n_bits,x_min,x_max,level,value,grad\n";
      for (std::size_t k = 0; k < p.values.size(); ++k) {
        os << fn << ',' << p.n_bits << ',' << format_double(p.x_min) << ','
           << format_double(p.x_max) << ',' << k << ',' << format_double(p.values[k]) << ','
           << format_double(p.grad_values[k]) << '\n';
      }
      break;
    }
  }
  return os.str();
}

act::ActivationSpec activation_from_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.rows.empty()) throw IoError(path + ": no coefficient rows");
  act::ActivationSpec spec;
  try {
    const std::size_t fcol = t.column("function");
    spec.function = act::function_from_string(t.rows.front()[fcol]);
    for (const auto& row : t.rows) {
      if (act::function_from_string(row[fcol]) != spec.function) {
        throw IoError(path + ": mixed functions in one table");
      }
    }
    auto num = [&](const std::vector<std::string>& row, const char* name) {
      return parse_double(row[t.column(name)]);
    };
    const auto has = [&](const char* name) {
      return std::find(t.header.begin(), t.header.end(), name) != t.header.end();
    };
    if (has("coefficient")) {
      act::TaylorParams p;
      p.order = static_cast<int>(num(t.rows.front(), "order"));
      p.boundary = num(t.rows.front(), "boundary");
      for (std::size_t k = 0; k < t.rows.size(); ++k) {
        if (static_cast<std::size_t>(num(t.rows[k], "power")) != k) {
          throw IoError(path + ": Taylor powers must be listed in order");
        }
        p.coefficients.push_back(num(t.rows[k], "coefficient"));
      }
      spec.params = std::move(p);
    } else if (has("slope")) {
      act::PwlParams p;
      for (const auto& row : t.rows) {
        p.segments.push_back({num(row, "lo"), num(row, "hi"), num(row, "slope"), num(row, "intercept")});
      }
      spec.params = std::move(p);
    } else if (has("grad")) {
      act::LutParams p;
      p.n_bits = static_cast<int>(num(t.rows.front(), "n_bits"));
      p.x_min = num(t.rows.front(), "x_min");
      p.x_max = num(t.rows.front(), "x_max");
      for (std::size_t k = 0; k < t.rows.size(); ++k) {
        if (static_cast<std::size_t>(num(t.rows[k], "level")) != k) {
          throw IoError(path + ": LUT levels must be listed in order");
        }
        p.values.push_back(num(t.rows[k], "value"));
        p.grad_values.push_back(num(t.rows[k], "grad"));
      }
      spec.params = std::move(p);
    } else {
      throw IoError(path + ": unrecognized coefficient table");
    }
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(path + ": " + e.what());
  }
  return spec;
}

std::string taps_to_csv(const CVec& taps) {
  std::ostringstream os;
  os << csv_schema_line() << "\nindex,re,im\n";
  for (std::size_t i = 0; i < taps.size(); ++i) {
    os << i << ',' << format_double(taps[i].real()) << ',' << format_double(taps[i].imag()) << '\n';
  }
  return os.str();
}

}  // namespace fibereq
