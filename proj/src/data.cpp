#include "star/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "star/error.hpp"
#include "star/rng.hpp"

namespace star {

SampleMatrix Dataset::feature_matrix() const {
  SampleMatrix X(size(), dim());
  for (Index i = 0; i < size(); ++i)
    X.row(i) = samples[static_cast<std::size_t>(i)].features.transpose();
  return X;
}

std::vector<int> Dataset::coarse_labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const LabeledSample& s : samples) out.push_back(s.coarse);
  return out;
}

std::vector<int> Dataset::fine_labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const LabeledSample& s : samples) out.push_back(s.fine_hidden);
  return out;
}

std::vector<SampleId> Dataset::ids() const {
  std::vector<SampleId> out;
  out.reserve(samples.size());
  for (const LabeledSample& s : samples) out.push_back(s.id);
  return out;
}

int fine_to_coarse(int fine, int coarse_m, int fine_k) {
  if (fine < 0 || fine >= fine_k)
    throw ConfigError("fine_to_coarse: fine label out of range");
  return static_cast<int>((static_cast<long long>(fine) * coarse_m) / fine_k);
}

GeneratedData generate_synthetic(int coarse_m, int fine_k, int n_per_fine,
                                 Index d_latent, Index d_in,
                                 double coarse_sep, double fine_sep,
                                 double noise, std::uint64_t seed) {
  if (coarse_m < 1) throw ConfigError("generate_synthetic: M must be >= 1");
  if (fine_k < coarse_m)
    throw ConfigError("generate_synthetic: K must be >= M");
  if (n_per_fine < 1)
    throw ConfigError("generate_synthetic: n_per_fine must be >= 1");
  if (d_latent < 1 || d_in < 1)
    throw ConfigError("generate_synthetic: dimensions must be >= 1");
  if (!(coarse_sep > 0.0) || !(fine_sep > 0.0))
    throw ConfigError("generate_synthetic: separations must be > 0");
  if (noise < 0.0) throw ConfigError("generate_synthetic: noise must be >= 0");

  GeneratedData out;
  GeneratorDebug& debug = out.debug;

  rng::Engine coarse_eng = rng::stream(seed, "gen-coarse-centers");
  debug.coarse_centers.resize(coarse_m, d_latent);
  for (Index i = 0; i < debug.coarse_centers.size(); ++i)
    debug.coarse_centers(i) = coarse_sep * rng::normal(coarse_eng);

  rng::Engine fine_eng = rng::stream(seed, "gen-fine-centers");
  debug.fine_centers.resize(fine_k, d_latent);
  for (int f = 0; f < fine_k; ++f) {
    const int parent = fine_to_coarse(f, coarse_m, fine_k);
    for (Index c = 0; c < d_latent; ++c)
      debug.fine_centers(f, c) = debug.coarse_centers(parent, c) +
                                 fine_sep * rng::normal(fine_eng);
  }

  // Fixed projection to feature space; scaling keeps feature magnitudes
  // comparable across latent widths.
  rng::Engine proj_eng = rng::stream(seed, "gen-projection");
  Matrixd projection(d_in, d_latent);
  for (Index i = 0; i < projection.size(); ++i)
    projection(i) =
        rng::normal(proj_eng) / std::sqrt(static_cast<double>(d_latent));

  const Index total = static_cast<Index>(fine_k) * n_per_fine;
  debug.latents.resize(total, d_latent);
  rng::Engine noise_eng = rng::stream(seed, "gen-noise");
  std::vector<LabeledSample> all(static_cast<std::size_t>(total));
  for (int f = 0; f < fine_k; ++f) {
    for (int j = 0; j < n_per_fine; ++j) {
      const Index idx = static_cast<Index>(f) * n_per_fine + j;
      Vectord z(d_latent);
      for (Index c = 0; c < d_latent; ++c)
        z(c) = debug.fine_centers(f, c) + noise * rng::normal(noise_eng);
      debug.latents.row(idx) = z.transpose();
      LabeledSample& s = all[static_cast<std::size_t>(idx)];
      s.id = idx;
      s.features = projection * z;
      s.coarse = fine_to_coarse(f, coarse_m, fine_k);
      s.fine_hidden = f;
    }
  }

  // 80/20 stratified split: per fine category, shuffle and take a fifth.
  for (int f = 0; f < fine_k; ++f) {
    std::vector<Index> idx(static_cast<std::size_t>(n_per_fine));
    for (int j = 0; j < n_per_fine; ++j)
      idx[static_cast<std::size_t>(j)] =
          static_cast<Index>(f) * n_per_fine + j;
    rng::Engine split_eng =
        rng::stream(seed, "gen-split", static_cast<std::uint64_t>(f));
    rng::shuffle(idx, split_eng);
    const std::size_t n_test = static_cast<std::size_t>(n_per_fine / 5);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const LabeledSample& s = all[static_cast<std::size_t>(idx[j])];
      if (j < n_test)
        out.test.samples.push_back(s);
      else
        out.train.samples.push_back(s);
    }
  }
  auto by_id = [](const LabeledSample& a, const LabeledSample& b) {
    return a.id < b.id;
  };
  std::sort(out.train.samples.begin(), out.train.samples.end(), by_id);
  std::sort(out.test.samples.begin(), out.test.samples.end(), by_id);

  out.manifest.n_train = out.train.size();
  out.manifest.n_test = out.test.size();
  out.manifest.coarse_m = coarse_m;
  out.manifest.fine_k = fine_k;
  out.manifest.d_in = d_in;
  out.manifest.seed = seed;
  std::ostringstream src;
  src << "synthetic M=" << coarse_m << " K=" << fine_k
      << " n_per_fine=" << n_per_fine << " d_latent=" << d_latent
      << " d_in=" << d_in << " coarse_sep=" << coarse_sep
      << " fine_sep=" << fine_sep << " noise=" << noise;
  out.manifest.source = src.str();
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const Dataset& ds, const DatasetManifest& m,
               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_dataset: cannot write " + path);
  out << "# star-dataset v1 n=" << ds.size() << " M=" << m.coarse_m
      << " K=" << m.fine_k << " d_in=" << m.d_in << "\n";
  out << "id,coarse,fine";
  for (Index c = 0; c < m.d_in; ++c) out << ",f" << c;
  out << "\n";
  for (const LabeledSample& s : ds.samples) {
    out << s.id << "," << s.coarse << "," << s.fine_hidden;
    for (Index c = 0; c < s.features.size(); ++c)
      out << "," << format_double(s.features(c));
    out << "\n";
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

long long parse_int(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw DataError(where + ": not an integer: '" + s + "'");
  }
  if (pos != s.size())
    throw DataError(where + ": not an integer: '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& where) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size() || s.empty())
    throw DataError(where + ": not a number: '" + s + "'");
  if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
  return v;
}

Dataset read_csv(const std::string& path, const DatasetManifest& m,
                 Index expected_n, bool coarse_required) {
  std::ifstream in(path);
  if (!in) throw DataError("load_dataset: cannot read " + path);
  std::string line;
  int line_no = 0;

  auto where = [&](const std::string& what) {
    return path + " line " + std::to_string(line_no) + ": " + what;
  };

  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  ++line_no;
  std::string header_prefix = "# star-dataset v1 ";
  if (line.rfind(header_prefix, 0) != 0)
    throw DataError(where("missing star-dataset header"));
  if (!std::getline(in, line)) throw DataError(path + ": missing column row");
  ++line_no;

  Dataset ds;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv(line);
    if (static_cast<Index>(fields.size()) != 3 + m.d_in)
      throw DataError(where("expected " + std::to_string(3 + m.d_in) +
                            " fields, found " +
                            std::to_string(fields.size())));
    LabeledSample s;
    s.id = parse_int(fields[0], where("id"));
    s.coarse = static_cast<int>(parse_int(fields[1], where("coarse label")));
    s.fine_hidden =
        static_cast<int>(parse_int(fields[2], where("fine label")));
    if (coarse_required && (s.coarse < 0 || s.coarse >= m.coarse_m))
      throw DataError(where("coarse label out of range [0, " +
                            std::to_string(m.coarse_m) + ")"));
    if (s.fine_hidden < -1 || s.fine_hidden >= m.fine_k)
      throw DataError(where("fine label out of range [-1, " +
                            std::to_string(m.fine_k) + ")"));
    s.features.resize(m.d_in);
    for (Index c = 0; c < m.d_in; ++c)
      s.features(c) =
          parse_double(fields[static_cast<std::size_t>(3 + c)],
                       where("feature " + std::to_string(c)));
    ds.samples.push_back(std::move(s));
  }
  if (ds.size() != expected_n)
    throw DataError(path + ": expected " + std::to_string(expected_n) +
                    " samples per manifest, found " +
                    std::to_string(ds.size()));
  return ds;
}

}  // namespace

void save_dataset(const GeneratedData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_csv(data.train, data.manifest, dir + "/train.csv");
  write_csv(data.test, data.manifest, dir + "/test.csv");
  nlohmann::json j;
  j["version"] = 1;
  j["n_train"] = data.manifest.n_train;
  j["n_test"] = data.manifest.n_test;
  j["M"] = data.manifest.coarse_m;
  j["K"] = data.manifest.fine_k;
  j["d_in"] = data.manifest.d_in;
  j["seed"] = data.manifest.seed;
  j["source"] = data.manifest.source;
  std::ofstream out(dir + "/manifest.json");
  if (!out)
    throw DataError("save_dataset: cannot write " + dir + "/manifest.json");
  out << j.dump(2) << "\n";
}

LoadedData load_dataset(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in)
    throw DataError("load_dataset: cannot read " + dir + "/manifest.json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_dataset: invalid manifest JSON: " +
                    std::string(e.what()));
  }
  LoadedData data;
  try {
    data.manifest.n_train = j.at("n_train").get<Index>();
    data.manifest.n_test = j.at("n_test").get<Index>();
    data.manifest.coarse_m = j.at("M").get<int>();
    data.manifest.fine_k = j.at("K").get<int>();
    data.manifest.d_in = j.at("d_in").get<Index>();
    data.manifest.seed = j.at("seed").get<std::uint64_t>();
    data.manifest.source = j.value("source", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_dataset: manifest field error: " +
                    std::string(e.what()));
  }
  if (data.manifest.coarse_m < 1 ||
      data.manifest.fine_k < data.manifest.coarse_m ||
      data.manifest.d_in < 1)
    throw DataError("load_dataset: manifest constraints violated (need K >= M >= 1, d_in >= 1)");
  data.train = read_csv(dir + "/train.csv", data.manifest,
                        data.manifest.n_train, /*coarse_required=*/true);
  data.test = read_csv(dir + "/test.csv", data.manifest, data.manifest.n_test,
                       /*coarse_required=*/false);
  return data;
}

}  // namespace star
