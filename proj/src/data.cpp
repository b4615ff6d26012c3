#include "c2f/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "c2f/rng.hpp"

namespace c2f::data {

using nlohmann::json;

void SyntheticConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synthetic config: need at least 2 classes");
  if (videos_per_class < 2) throw std::invalid_argument("synthetic config: need at least 2 videos per class");
  if (frames < 1 || channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("synthetic config: degenerate geometry");
  }
  if (signature_size < 1 || signature_size > height || signature_size > width) {
    throw std::invalid_argument("synthetic config: signature patch does not fit the frame");
  }
  if (lag < 0 || signature_width < 1) throw std::invalid_argument("synthetic config: bad window parameters");
  if (lag >= frames - signature_width) {
    throw std::invalid_argument("synthetic config: infeasible window placement (lag must be < frames - signature_width)");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("synthetic config: train_fraction must be in (0,1)");
  }
  std::vector<char> used(static_cast<std::size_t>(num_classes), 0);
  for (const auto& [a, b] : confusable_pairs) {
    if (a < 0 || b < 0 || a >= num_classes || b >= num_classes || a == b) {
      throw std::invalid_argument("synthetic config: invalid confusable pair");
    }
    if (used[static_cast<std::size_t>(a)] || used[static_cast<std::size_t>(b)]) {
      throw std::invalid_argument("synthetic config: class appears in more than one confusable pair");
    }
    used[static_cast<std::size_t>(a)] = used[static_cast<std::size_t>(b)] = 1;
  }
}

namespace {

struct Signature {
  std::vector<double> pattern;  // channels * size * size
  int py = 0;
  int px = 0;
};

Signature draw_signature(const SyntheticConfig& cfg, Rng& rng) {
  Signature s;
  s.pattern.resize(static_cast<std::size_t>(cfg.channels) * cfg.signature_size * cfg.signature_size);
  for (double& v : s.pattern) v = cfg.signature_amplitude * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
  s.py = rng.uniform_int(cfg.height - cfg.signature_size + 1);
  s.px = rng.uniform_int(cfg.width - cfg.signature_size + 1);
  return s;
}

void add_signature(std::vector<float>& stream, const SyntheticConfig& cfg, const Signature& sig, int t) {
  const std::int64_t frame_off = static_cast<std::int64_t>(t) * cfg.frame_values();
  for (int ch = 0; ch < cfg.channels; ++ch) {
    for (int y = 0; y < cfg.signature_size; ++y) {
      for (int x = 0; x < cfg.signature_size; ++x) {
        const std::int64_t idx =
            frame_off + (static_cast<std::int64_t>(ch) * cfg.height + (sig.py + y)) * cfg.width + (sig.px + x);
        stream[static_cast<std::size_t>(idx)] +=
            static_cast<float>(sig.pattern[(static_cast<std::size_t>(ch) * cfg.signature_size + y) * cfg.signature_size + x]);
      }
    }
  }
}

}  // namespace

Dataset generate_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng master(cfg.seed);

  // Per-class, per-stream signatures; confusable pairs copy one stream's
  // signature from their partner (even pair index: stream 1, odd: stream 2).
  Rng sig_rng = master.fork(1);
  std::vector<std::array<Signature, 2>> sigs(static_cast<std::size_t>(cfg.num_classes));
  for (int c = 0; c < cfg.num_classes; ++c) {
    sigs[static_cast<std::size_t>(c)][0] = draw_signature(cfg, sig_rng);
    sigs[static_cast<std::size_t>(c)][1] = draw_signature(cfg, sig_rng);
  }
  for (std::size_t i = 0; i < cfg.confusable_pairs.size(); ++i) {
    const auto& [a, b] = cfg.confusable_pairs[i];
    const int shared_stream = (i % 2 == 0) ? 0 : 1;
    sigs[static_cast<std::size_t>(b)][static_cast<std::size_t>(shared_stream)] =
        sigs[static_cast<std::size_t>(a)][static_cast<std::size_t>(shared_stream)];
  }

  Dataset ds;
  ds.config = cfg;
  ds.videos.resize(static_cast<std::size_t>(cfg.num_classes) * cfg.videos_per_class);

  Rng vid_rng = master.fork(2);
  const std::int64_t stream_values = static_cast<std::int64_t>(cfg.frames) * cfg.frame_values();
  const int onset_range = cfg.frames - cfg.signature_width - cfg.lag;  // exclusive upper bound is onset_range
  for (int c = 0; c < cfg.num_classes; ++c) {
    for (int v = 0; v < cfg.videos_per_class; ++v) {
      Video& vid = ds.videos[static_cast<std::size_t>(c) * cfg.videos_per_class + v];
      vid.label = c;
      vid.onset1 = vid_rng.uniform_int(onset_range);
      vid.onset2 = vid.onset1 + cfg.lag;
      vid.stream1.resize(static_cast<std::size_t>(stream_values));
      vid.stream2.resize(static_cast<std::size_t>(stream_values));
      for (float& x : vid.stream1) x = static_cast<float>(cfg.noise_sigma * vid_rng.normal());
      for (float& x : vid.stream2) x = static_cast<float>(cfg.noise_sigma * vid_rng.normal());
      for (int t = vid.onset1; t < vid.onset1 + cfg.signature_width; ++t) {
        add_signature(vid.stream1, cfg, sigs[static_cast<std::size_t>(c)][0], t);
      }
      for (int t = vid.onset2; t < vid.onset2 + cfg.signature_width; ++t) {
        add_signature(vid.stream2, cfg, sigs[static_cast<std::size_t>(c)][1], t);
      }
    }
  }

  // Stratified split, deterministic under the seed.
  Rng split_rng = master.fork(3);
  for (int c = 0; c < cfg.num_classes; ++c) {
    std::vector<int> idx(static_cast<std::size_t>(cfg.videos_per_class));
    for (int v = 0; v < cfg.videos_per_class; ++v) idx[static_cast<std::size_t>(v)] = c * cfg.videos_per_class + v;
    split_rng.shuffle(idx);
    int n_train = static_cast<int>(std::lround(cfg.train_fraction * cfg.videos_per_class));
    n_train = std::clamp(n_train, 1, cfg.videos_per_class - 1);
    for (int v = 0; v < cfg.videos_per_class; ++v) {
      (v < n_train ? ds.train_indices : ds.test_indices).push_back(idx[static_cast<std::size_t>(v)]);
    }
  }
  std::sort(ds.train_indices.begin(), ds.train_indices.end());
  std::sort(ds.test_indices.begin(), ds.test_indices.end());
  return ds;
}

Tensor Dataset::frame(int video, int stream, int t) const {
  if (video < 0 || video >= static_cast<int>(videos.size())) throw std::out_of_range("video index out of range");
  if (t < 0 || t >= config.frames) throw std::out_of_range("frame index out of range");
  const Video& v = videos[static_cast<std::size_t>(video)];
  const std::vector<float>& s = (stream == 1) ? v.stream1 : v.stream2;
  if (stream != 1 && stream != 2) throw std::invalid_argument("stream must be 1 or 2");
  const std::int64_t n = config.frame_values();
  Tensor out = Tensor::zeros({config.channels, config.height, config.width});
  const float* src = s.data() + static_cast<std::int64_t>(t) * n;
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = static_cast<double>(src[i]);
  return out;
}

namespace {

constexpr char kVideoMagic[8] = {'C', '2', 'F', 'V', 'I', 'D', '1', '\0'};

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_stream(std::ostream& os, const std::vector<float>& s, const SyntheticConfig& cfg) {
  write_u32(os, 4);
  write_u32(os, static_cast<std::uint32_t>(cfg.frames));
  write_u32(os, static_cast<std::uint32_t>(cfg.channels));
  write_u32(os, static_cast<std::uint32_t>(cfg.height));
  write_u32(os, static_cast<std::uint32_t>(cfg.width));
  os.write(reinterpret_cast<const char*>(s.data()), static_cast<std::streamsize>(s.size() * sizeof(float)));
}

std::vector<float> read_stream(std::istream& is, const SyntheticConfig& cfg, const std::string& file) {
  const std::uint32_t ndim = read_u32(is);
  if (ndim != 4) throw std::runtime_error("unexpected tensor rank in " + file);
  const std::uint32_t t = read_u32(is), c = read_u32(is), h = read_u32(is), w = read_u32(is);
  if (static_cast<int>(t) != cfg.frames || static_cast<int>(c) != cfg.channels || static_cast<int>(h) != cfg.height ||
      static_cast<int>(w) != cfg.width) {
    throw std::runtime_error("video tensor shape does not match manifest config in " + file);
  }
  std::vector<float> s(static_cast<std::size_t>(t) * c * h * w);
  is.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(s.size() * sizeof(float)));
  if (!is) throw std::runtime_error("truncated video file " + file);
  return s;
}

json config_json(const SyntheticConfig& cfg) {
  json pairs = json::array();
  for (const auto& [a, b] : cfg.confusable_pairs) pairs.push_back({a, b});
  return json{{"num_classes", cfg.num_classes},
              {"videos_per_class", cfg.videos_per_class},
              {"frames", cfg.frames},
              {"channels", cfg.channels},
              {"height", cfg.height},
              {"width", cfg.width},
              {"lag", cfg.lag},
              {"signature_width", cfg.signature_width},
              {"signature_size", cfg.signature_size},
              {"signature_amplitude", cfg.signature_amplitude},
              {"noise_sigma", cfg.noise_sigma},
              {"confusable_pairs", pairs},
              {"train_fraction", cfg.train_fraction},
              {"seed", cfg.seed}};
}

SyntheticConfig config_from_json(const json& j) {
  SyntheticConfig cfg;
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.videos_per_class = j.at("videos_per_class").get<int>();
  cfg.frames = j.at("frames").get<int>();
  cfg.channels = j.at("channels").get<int>();
  cfg.height = j.at("height").get<int>();
  cfg.width = j.at("width").get<int>();
  cfg.lag = j.at("lag").get<int>();
  cfg.signature_width = j.at("signature_width").get<int>();
  cfg.signature_size = j.at("signature_size").get<int>();
  cfg.signature_amplitude = j.at("signature_amplitude").get<double>();
  cfg.noise_sigma = j.at("noise_sigma").get<double>();
  cfg.confusable_pairs.clear();
  for (const auto& p : j.at("confusable_pairs")) cfg.confusable_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  cfg.train_fraction = j.at("train_fraction").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "videos");
  json manifest;
  manifest["schema_version"] = 1;
  manifest["config"] = config_json(ds.config);
  json vids = json::array();
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    const Video& v = ds.videos[i];
    char name[32];
    std::snprintf(name, sizeof name, "videos/v%05zu.bin", i);
    const bool is_train =
        std::binary_search(ds.train_indices.begin(), ds.train_indices.end(), static_cast<int>(i));
    vids.push_back(json{{"file", name},
                        {"label", v.label},
                        {"onset1", v.onset1},
                        {"onset2", v.onset2},
                        {"split", is_train ? "train" : "test"}});
    std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write video file " + (dir / name).string());
    os.write(kVideoMagic, sizeof kVideoMagic);
    write_u32(os, 1);  // version
    write_u32(os, 1);  // dtype float32
    write_u32(os, 2);  // streams
    write_stream(os, v.stream1, ds.config);
    write_stream(os, v.stream2, ds.config);
    if (!os) throw std::runtime_error("video write failed " + (dir / name).string());
  }
  manifest["videos"] = std::move(vids);
  std::ofstream ms(dir / "manifest.json", std::ios::trunc);
  if (!ms) throw std::runtime_error("cannot write manifest in " + dir.string());
  ms << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw std::runtime_error("missing dataset manifest: " + (dir / "manifest.json").string());
  json manifest = json::parse(ms);
  Dataset ds;
  ds.config = config_from_json(manifest.at("config"));
  const auto& vids = manifest.at("videos");
  ds.videos.resize(vids.size());
  for (std::size_t i = 0; i < vids.size(); ++i) {
    const auto& jv = vids[i];
    const std::string file = jv.at("file").get<std::string>();
    Video& v = ds.videos[i];
    v.label = jv.at("label").get<int>();
    v.onset1 = jv.at("onset1").get<int>();
    v.onset2 = jv.at("onset2").get<int>();
    std::ifstream is(dir / file, std::ios::binary);
    if (!is) throw std::runtime_error("missing video file " + (dir / file).string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kVideoMagic, sizeof kVideoMagic) != 0) {
      throw std::runtime_error("not a video tensor file: " + (dir / file).string());
    }
    if (read_u32(is) != 1) throw std::runtime_error("unsupported video file version in " + file);
    if (read_u32(is) != 1) throw std::runtime_error("unsupported dtype in " + file);
    if (read_u32(is) != 2) throw std::runtime_error("expected 2 streams in " + file);
    v.stream1 = read_stream(is, ds.config, file);
    v.stream2 = read_stream(is, ds.config, file);
    if (jv.at("split").get<std::string>() == "train") {
      ds.train_indices.push_back(static_cast<int>(i));
    } else {
      ds.test_indices.push_back(static_cast<int>(i));
    }
  }
  return ds;
}

}  // namespace c2f::data
