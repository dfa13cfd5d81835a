#include "sahnet/train/checkpoint.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "sahnet/error.hpp"
#include "sahnet/volio/nifti.hpp"

namespace sahnet::train {
namespace {

constexpr const char* kHeader = "sahnet-checkpoint 1";

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const T& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<typename T::value_type>)
      s += fmt(xs[i]);
    else
      s += std::to_string(xs[i]);
  }
  return s;
}

std::string shape_text(const tensor::Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

[[noreturn]] void corrupt(const std::string& msg) { fail(Errc::ManifestCorrupt, "checkpoint manifest: " + msg); }

double to_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') corrupt("bad number '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) corrupt("bad integer '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& s, char sep) {
  std::vector<std::size_t> out;
  for (const auto& p : split(s, sep)) out.push_back(static_cast<std::size_t>(to_uint(p)));
  return out;
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

double get_f32(const std::uint8_t* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

struct Entry {
  std::string name;
  tensor::Shape shape;
  bool f32;
  std::size_t offset, length;
};

}  // namespace

EncodedCheckpoint encode_checkpoint(const net::Model& model, const Adam* optimizer, const CheckpointMeta& meta) {
  const auto& c = model.config();
  std::ostringstream m;
  m << kHeader << "\n";
  m << "epoch " << meta.epoch << "\n";
  m << "phase " << meta.phase << "\n";
  m << "lr " << fmt(meta.lr) << "\n";
  m << "monitor " << (meta.monitor.empty() ? "-" : meta.monitor) << "\n";
  m << "best_metric " << fmt(meta.best_metric) << "\n";
  m << "seed " << meta.seed << "\n";
  m << "optimizer_steps " << (optimizer ? optimizer->steps() : 0) << "\n";
  m << "model.spatial_dims " << c.spatial_dims << "\n";
  m << "model.block_layers " << join(c.block_layers) << "\n";
  m << "model.growth_rate " << c.growth_rate << "\n";
  m << "model.init_channels " << c.init_channels << "\n";
  m << "model.bn_size " << c.bn_size << "\n";
  m << "model.compression " << fmt(c.compression) << "\n";
  m << "model.num_classes " << c.num_classes << "\n";
  m << "model.in_channels " << c.in_channels << "\n";
  m << "model.input_shape " << join(c.input_shape) << "\n";
  m << "model.dropout_rate " << fmt(c.dropout_rate) << "\n";
  if (const auto* spec = model.metadata_spec()) {
    std::vector<int> flags;
    std::vector<double> mean, sd;
    for (std::size_t j = 0; j < net::kMetadataFields; ++j) {
      const auto f = static_cast<net::MetadataField>(j);
      flags.push_back(spec->standardized(f) ? 1 : 0);
      mean.push_back(spec->mean(f));
      sd.push_back(spec->stddev(f));
    }
    m << "metadata.standardize " << join(flags) << "\n";
    m << "metadata.mean " << join(mean) << "\n";
    m << "metadata.stddev " << join(sd) << "\n";
  }

  EncodedCheckpoint out;
  std::vector<std::string> lines;
  auto add = [&](const std::string& name, const tensor::Tensor& t, bool f32) {
    const std::size_t offset = out.blob.size();
    for (double v : t.data()) f32 ? put_f32(out.blob, v) : put_f64(out.blob, v);
    lines.push_back("tensor " + name + " " + shape_text(t.shape()) + (f32 ? " f32 " : " f64 ") +
                    std::to_string(offset) + " " + std::to_string(out.blob.size() - offset));
  };
  for (const auto& p : model.parameters()) add("param/" + p.name, p.value, true);
  for (const auto& b : model.buffers()) add("buffer/" + b.name, b.value, false);
  if (optimizer) {
    for (const auto& p : model.parameters()) add("adam.m/" + p.name, optimizer->first_moments().at(p.name), false);
    for (const auto& p : model.parameters()) add("adam.v/" + p.name, optimizer->second_moments().at(p.name), false);
  }
  m << "tensors " << lines.size() << "\n";
  for (const auto& l : lines) m << l << "\n";
  m << "end\n";
  out.manifest = m.str();
  return out;
}

std::size_t manifest_tensor_count(const std::string& manifest) {
  std::size_t n = 0;
  for (const auto& line : split(manifest, '\n'))
    if (line.rfind("tensor ", 0) == 0) ++n;
  return n;
}

Checkpoint decode_checkpoint(const std::string& manifest, std::span<const std::uint8_t> blob) {
  const auto lines = split(manifest, '\n');
  if (lines.empty() || lines[0] != kHeader) corrupt("missing header");
  std::map<std::string, std::string> kv;
  std::vector<Entry> entries;
  std::size_t declared = 0;
  bool ended = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (ended) corrupt("content after end");
    if (line == "end") {
      ended = true;
      continue;
    }
    const auto sp = line.find(' ');
    if (sp == std::string::npos) corrupt("malformed line '" + line + "'");
    const std::string key = line.substr(0, sp), value = line.substr(sp + 1);
    if (key == "tensor") {
      const auto f = split(value, ' ');
      if (f.size() != 5 || (f[2] != "f32" && f[2] != "f64")) corrupt("malformed tensor line '" + line + "'");
      Entry e{f[0], to_sizes(f[1], 'x'), f[2] == "f32", static_cast<std::size_t>(to_uint(f[3])),
              static_cast<std::size_t>(to_uint(f[4]))};
      for (auto d : e.shape)
        if (d == 0) corrupt("zero extent in " + e.name);
      if (e.length != tensor::numel(e.shape) * (e.f32 ? 4 : 8)) corrupt("length of " + e.name + " does not match its shape");
      const std::size_t expected = entries.empty() ? 0 : entries.back().offset + entries.back().length;
      if (e.offset != expected) corrupt("offsets of " + e.name + " are not contiguous");
      entries.push_back(std::move(e));
    } else if (key == "tensors") {
      declared = static_cast<std::size_t>(to_uint(value));
    } else {
      if (kv.contains(key)) corrupt("duplicate key " + key);
      kv[key] = value;
    }
  }
  if (!ended) corrupt("missing end marker");
  if (declared != entries.size()) corrupt("tensor count does not match the listed entries");
  const std::size_t payload = entries.empty() ? 0 : entries.back().offset + entries.back().length;
  if (payload != blob.size())
    fail(Errc::BlobLengthMismatch, "checkpoint blob has " + std::to_string(blob.size()) + " bytes, manifest describes " +
                                       std::to_string(payload));

  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) corrupt("missing key " + k);
    return it->second;
  };
  net::DenseNetConfig cfg;
  cfg.spatial_dims = static_cast<std::size_t>(to_uint(need("model.spatial_dims")));
  cfg.block_layers = to_sizes(need("model.block_layers"), ',');
  cfg.growth_rate = static_cast<std::size_t>(to_uint(need("model.growth_rate")));
  cfg.init_channels = static_cast<std::size_t>(to_uint(need("model.init_channels")));
  cfg.bn_size = static_cast<std::size_t>(to_uint(need("model.bn_size")));
  cfg.compression = to_double(need("model.compression"));
  cfg.num_classes = static_cast<std::size_t>(to_uint(need("model.num_classes")));
  cfg.in_channels = static_cast<std::size_t>(to_uint(need("model.in_channels")));
  cfg.input_shape = to_sizes(need("model.input_shape"), ',');
  cfg.dropout_rate = to_double(need("model.dropout_rate"));
  net::Model model = [&] {
    try {
      return net::build(cfg);
    } catch (const Error& e) {
      corrupt(std::string("model config: ") + e.what());
    }
  }();
  if (kv.contains("metadata.mean")) {
    net::MetadataSpec spec;
    const auto flags = to_sizes(need("metadata.standardize"), ',');
    const auto mean = split(need("metadata.mean"), ','), sd = split(need("metadata.stddev"), ',');
    if (flags.size() != net::kMetadataFields || mean.size() != net::kMetadataFields || sd.size() != net::kMetadataFields)
      corrupt("metadata statistics need " + std::to_string(net::kMetadataFields) + " values");
    net::MetadataRow mr{}, sr{};
    for (std::size_t j = 0; j < net::kMetadataFields; ++j) {
      spec.set_standardized(static_cast<net::MetadataField>(j), flags[j] != 0);
      mr[j] = to_double(mean[j]);
      sr[j] = to_double(sd[j]);
    }
    spec.set_stats(mr, sr);
    model = net::fuse_metadata(model, spec);
  }

  Checkpoint ck{std::move(model), Adam{}, {}};
  ck.optimizer.attach(ck.model);
  ck.optimizer.set_steps(to_uint(need("optimizer_steps")));
  ck.meta.epoch = static_cast<std::size_t>(to_uint(need("epoch")));
  ck.meta.phase = static_cast<int>(to_uint(need("phase")));
  ck.meta.lr = to_double(need("lr"));
  ck.meta.monitor = need("monitor") == "-" ? "" : need("monitor");
  ck.meta.best_metric = to_double(need("best_metric"));
  ck.meta.seed = to_uint(need("seed"));

  std::map<std::string, bool> seen;
  for (const auto& e : entries) {
    const auto slash = e.name.find('/');
    if (slash == std::string::npos) fail(Errc::UnknownTensorName, "unknown checkpoint tensor '" + e.name + "'");
    const std::string kind = e.name.substr(0, slash), name = e.name.substr(slash + 1);
    tensor::Tensor target;
    if (kind == "param" && ck.model.has_parameter(name)) {
      target = ck.model.parameter(name);
    } else if (kind == "buffer") {
      try {
        target = ck.model.buffer(name);
      } catch (const Error&) {
        fail(Errc::UnknownTensorName, "unknown checkpoint tensor '" + e.name + "'");
      }
    } else if (kind == "adam.m" && ck.optimizer.first_moments().contains(name)) {
      target = ck.optimizer.first_moments().at(name);
    } else if (kind == "adam.v" && ck.optimizer.second_moments().contains(name)) {
      target = ck.optimizer.second_moments().at(name);
    } else {
      fail(Errc::UnknownTensorName, "unknown checkpoint tensor '" + e.name + "'");
    }
    if (target.shape() != e.shape) corrupt("shape of " + e.name + " does not match the model");
    if (seen[e.name]) corrupt("duplicate tensor " + e.name);
    seen[e.name] = true;
    auto d = target.data();
    const std::uint8_t* p = blob.data() + e.offset;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = e.f32 ? get_f32(p + 4 * i) : get_f64(p + 8 * i);
  }
  for (const auto& p : ck.model.parameters())
    if (!seen.contains("param/" + p.name)) corrupt("missing parameter " + p.name);
  for (const auto& b : ck.model.buffers())
    if (!seen.contains("buffer/" + b.name)) corrupt("missing buffer " + b.name);
  return ck;
}

std::filesystem::path checkpoint_stem(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".manifest" || ext == ".blob") return path.parent_path() / path.stem();
  return path;
}

void save_checkpoint(const std::filesystem::path& stem, const EncodedCheckpoint& encoded) {
  const auto base = checkpoint_stem(stem);
  const std::string m = encoded.manifest;
  volio::write_file(base.string() + ".manifest", std::span(reinterpret_cast<const std::uint8_t*>(m.data()), m.size()));
  volio::write_file(base.string() + ".blob", encoded.blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto base = checkpoint_stem(path);
  const auto m = volio::read_file(base.string() + ".manifest");
  const auto b = volio::read_file(base.string() + ".blob");
  return decode_checkpoint(std::string(m.begin(), m.end()), b);
}

}  // namespace sahnet::train
