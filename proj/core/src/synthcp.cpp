#include "vqasem/synthcp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vqasem {

void WorldSpec::validate() const {
  if (categories.empty()) throw std::runtime_error("world: no categories");
  if (templates.empty()) throw std::runtime_error("world: no templates");
  std::set<std::string> seen;
  for (const Category& cat : categories) {
    if (cat.answers.empty()) throw std::runtime_error("world: category '" + cat.name + "' empty");
    for (const std::string& a : cat.answers) {
      if (a != normalize_answer(a)) {
        throw std::runtime_error("world: answer '" + a + "' is not normalized");
      }
      if (!seen.insert(a).second) {
        throw std::runtime_error("world: answer '" + a + "' appears in two categories");
      }
    }
  }
  for (const QuestionTemplate& t : templates) {
    if (t.category < 0 || t.category >= static_cast<int>(categories.size())) {
      throw std::runtime_error("world: template '" + t.id + "' references a missing category");
    }
    if (t.tokens.empty()) throw std::runtime_error("world: template '" + t.id + "' has no tokens");
  }
  if (feature_dim < 1) throw std::runtime_error("world: feature_dim must be positive");
  if (feature_noise < 0.0) throw std::runtime_error("world: feature_noise must be nonnegative");
  if (annotator_noise < 0.0 || annotator_noise >= 1.0) {
    throw std::runtime_error("world: annotator_noise must lie in [0, 1)");
  }
  if (!confusion.empty()) {
    if (confusion.size() != categories.size()) {
      throw std::runtime_error("world: confusion kernel count != category count");
    }
    for (std::size_t c = 0; c < confusion.size(); ++c) {
      const int m = static_cast<int>(categories[c].answers.size());
      const Tensor2& k = confusion[c];
      if (k.rows != m || k.cols != m) {
        throw std::runtime_error("world: confusion kernel shape mismatch for category '" +
                                 categories[c].name + "'");
      }
      for (int i = 0; i < m; ++i) {
        if (k.at(i, i) != 0.0) {
          throw std::runtime_error("world: confusion kernel diagonal must be zero");
        }
        for (int j = 0; j < m; ++j) {
          if (k.at(i, j) < 0.0) throw std::runtime_error("world: negative confusion weight");
        }
      }
    }
  }
}

int WorldSpec::answer_count() const {
  int n = 0;
  for (const Category& cat : categories) n += static_cast<int>(cat.answers.size());
  return n;
}

std::optional<std::pair<int, int>> WorldSpec::find_answer(const std::string& answer) const {
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const auto& members = categories[c].answers;
    for (std::size_t m = 0; m < members.size(); ++m) {
      if (members[m] == answer) return std::make_pair(static_cast<int>(c), static_cast<int>(m));
    }
  }
  return std::nullopt;
}

WorldSpec default_world() {
  WorldSpec world;
  world.categories = {
      {"colors",
       "color",
       {"orange", "white", "red", "blue", "green", "gray", "black", "pink", "brown", "yellow"}},
      {"dogs",
       "dog",
       {"puppy", "golden retriever", "german shepherd", "husky", "terrier", "labrador", "sheepdog",
        "rottweiler", "corgi"}},
      {"motorcycles", "motorcycle", {"yamaha", "kawasaki", "harley", "suzuki"}},
      {"trees", "tree", {"log", "palm tree", "tree branch", "christmas tree"}},
  };
  const auto tokens = [](const std::string& text) {
    std::istringstream ts(text);
    std::vector<std::string> out;
    std::string tok;
    while (ts >> tok) out.push_back(tok);
    return out;
  };
  world.templates = {
      {"color-car", tokens("what color is the car"), 0},
      {"color-shirt", tokens("what color is the shirt"), 0},
      {"dog-breed", tokens("what breed is the dog"), 1},
      {"dog-park", tokens("which dog is at the park"), 1},
      {"moto-brand", tokens("what brand is the motorcycle"), 2},
      {"moto-street", tokens("which motorcycle is parked outside"), 2},
      {"tree-kind", tokens("what kind of tree is this"), 3},
      {"tree-yard", tokens("which tree is in the yard"), 3},
  };
  for (const Category& cat : world.categories) {
    world.confusion.push_back(
        ring_confusion_kernel(static_cast<int>(cat.answers.size()), 0.08));
  }
  world.validate();
  return world;
}

Tensor2 ring_confusion_kernel(int members, double decay) {
  if (members < 1) throw std::invalid_argument("ring_confusion_kernel: empty category");
  if (decay <= 0.0 || decay >= 1.0) {
    throw std::invalid_argument("ring_confusion_kernel: decay must lie in (0, 1)");
  }
  Tensor2 k(members, members);
  if (members == 1) return k;
  for (int i = 0; i < members; ++i) {
    double total = 0.0;
    for (int j = 0; j < members; ++j) {
      if (j == i) continue;
      const int around = std::abs(j - i);
      const int dist = std::min(around, members - around);
      k.at(i, j) = std::pow(decay, dist - 1);
      total += k.at(i, j);
    }
    for (int j = 0; j < members; ++j) k.at(i, j) /= total;
  }
  return k;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

}  // namespace

WorldSpec parse_world_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("world config: ") + e.what());
  }
  WorldSpec world;
  try {
    for (const json& jc : j.at("categories")) {
      Category cat;
      cat.name = jc.at("name").get<std::string>();
      cat.keyword = jc.at("keyword").get<std::string>();
      cat.answers = jc.at("answers").get<std::vector<std::string>>();
      world.categories.push_back(std::move(cat));
    }
    for (const json& jt : j.at("templates")) {
      QuestionTemplate t;
      t.id = jt.at("id").get<std::string>();
      const std::string question = jt.at("question").get<std::string>();
      std::istringstream qs(question);
      std::string tok;
      while (qs >> tok) t.tokens.push_back(tok);
      const std::string cat_name = jt.at("category").get<std::string>();
      t.category = -1;
      for (std::size_t c = 0; c < world.categories.size(); ++c) {
        if (world.categories[c].name == cat_name) t.category = static_cast<int>(c);
      }
      if (t.category < 0) {
        throw std::runtime_error("world config: template '" + t.id + "' names unknown category '" +
                                 cat_name + "'");
      }
      world.templates.push_back(std::move(t));
    }
    world.feature_dim = j.value("feature_dim", world.feature_dim);
    world.prototype_scale = j.value("prototype_scale", world.prototype_scale);
    world.feature_noise = j.value("feature_noise", world.feature_noise);
    world.annotator_noise = j.value("annotator_noise", world.annotator_noise);
    world.prototype_seed = j.value("prototype_seed", world.prototype_seed);
    if (j.contains("confusion")) {
      for (const json& jk : j.at("confusion")) {
        const auto rows = jk.get<std::vector<std::vector<double>>>();
        Tensor2 k(static_cast<int>(rows.size()),
                  rows.empty() ? 0 : static_cast<int>(rows[0].size()));
        for (int r = 0; r < k.rows; ++r) {
          if (static_cast<int>(rows[r].size()) != k.cols) {
            throw std::runtime_error("world config: ragged confusion kernel");
          }
          std::copy(rows[r].begin(), rows[r].end(), k.row(r).begin());
        }
        world.confusion.push_back(std::move(k));
      }
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("world config: ") + e.what());
  }
  world.validate();
  return world;
}

std::string world_to_json(const WorldSpec& world) {
  ordered_json j;
  j["categories"] = json::array();
  for (const Category& cat : world.categories) {
    ordered_json jc;
    jc["name"] = cat.name;
    jc["keyword"] = cat.keyword;
    jc["answers"] = cat.answers;
    j["categories"].push_back(jc);
  }
  j["templates"] = json::array();
  for (const QuestionTemplate& t : world.templates) {
    ordered_json jt;
    jt["id"] = t.id;
    std::string question;
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      if (i > 0) question += ' ';
      question += t.tokens[i];
    }
    jt["question"] = question;
    jt["category"] = world.categories[t.category].name;
    j["templates"].push_back(jt);
  }
  j["feature_dim"] = world.feature_dim;
  j["prototype_scale"] = world.prototype_scale;
  j["feature_noise"] = world.feature_noise;
  j["annotator_noise"] = world.annotator_noise;
  j["prototype_seed"] = world.prototype_seed;
  if (!world.confusion.empty()) {
    j["confusion"] = json::array();
    for (const Tensor2& k : world.confusion) {
      std::vector<std::vector<double>> rows;
      for (int r = 0; r < k.rows; ++r) {
        rows.emplace_back(k.row(r).begin(), k.row(r).end());
      }
      j["confusion"].push_back(rows);
    }
  }
  return j.dump(2);
}

WorldSpec load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_world_json(buffer.str());
}

void save_world(const WorldSpec& world, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << world_to_json(world) << '\n';
  if (!out) throw std::runtime_error("write failed: '" + path + "'");
}

void PriorShiftConfig::validate(const WorldSpec& world) const {
  if (train_priors.size() != world.templates.size() ||
      test_priors.size() != world.templates.size()) {
    throw std::runtime_error("prior shift: prior count != template count");
  }
  for (std::size_t t = 0; t < train_priors.size(); ++t) {
    const std::size_t m = world.categories[world.templates[t].category].answers.size();
    for (const auto* priors : {&train_priors, &test_priors}) {
      const std::vector<double>& p = (*priors)[t];
      if (p.size() != m) throw std::runtime_error("prior shift: prior size != category size");
      double sum = 0.0;
      int support = 0;
      for (double v : p) {
        if (v < 0.0) throw std::runtime_error("prior shift: negative probability");
        sum += v;
        if (v > 0.0) ++support;
      }
      if (support == 0) {
        throw std::runtime_error("prior shift: degenerate prior for template '" +
                                 world.templates[t].id + "' (mass on 0 answers)");
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw std::runtime_error("prior shift: prior for template '" + world.templates[t].id +
                                 "' sums to " + std::to_string(sum));
      }
    }
  }
}

PriorShiftConfig make_mode_swap_shift(const WorldSpec& world, double s, double mode_mass) {
  if (s < 0.0 || s > 1.0) throw std::invalid_argument("shift strength must lie in [0, 1]");
  if (mode_mass <= 0.0 || mode_mass > 1.0) {
    throw std::invalid_argument("mode_mass must lie in (0, 1]");
  }
  // Tail mass decays with ring distance from the mode, so members across the
  // ring are rare in training. The test prior is the same shape re-centered
  // on the far partner: what was rare becomes the new mode.
  constexpr double kTailDecay = 0.45;
  PriorShiftConfig cfg;
  cfg.shift = s;
  std::vector<int> seen_per_category(world.categories.size(), 0);
  for (const QuestionTemplate& t : world.templates) {
    const int m = static_cast<int>(world.categories[t.category].answers.size());
    const int ordinal = seen_per_category[t.category]++;
    std::vector<double> base(m, 0.0);
    if (m == 1) {
      base[0] = 1.0;
      cfg.train_priors.push_back(base);
      cfg.test_priors.push_back(base);
      continue;
    }
    const int mode = ordinal % m;
    double tail_total = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == mode) continue;
      const int around = std::abs(j - mode);
      const int dist = std::min(around, m - around);
      base[j] = std::pow(kTailDecay, dist);
      tail_total += base[j];
    }
    for (int j = 0; j < m; ++j) {
      if (j != mode) base[j] *= (1.0 - mode_mass) / tail_total;
    }
    base[mode] = mode_mass;

    const int partner = (mode + std::max(1, m / 2)) % m;
    std::vector<double> rotated(m);
    const int offset = partner - mode;
    for (int j = 0; j < m; ++j) rotated[j] = base[((j - offset) % m + m) % m];

    std::vector<double> test(m);
    for (int j = 0; j < m; ++j) test[j] = (1.0 - s) * base[j] + s * rotated[j];

    cfg.train_priors.push_back(std::move(base));
    cfg.test_priors.push_back(std::move(test));
  }
  cfg.validate(world);
  return cfg;
}

std::vector<std::string> simulate_annotators(int category, int member, const WorldSpec& world,
                                             Rng& rng) {
  const Category& cat = world.categories.at(category);
  const int m = static_cast<int>(cat.answers.size());
  if (member < 0 || member >= m) throw std::out_of_range("simulate_annotators: bad member");

  std::vector<std::string> answers;
  answers.reserve(kAnnotatorsPerQuestion);
  for (int a = 0; a < kAnnotatorsPerQuestion; ++a) {
    int pick = member;
    if (m > 1 && rng.uniform01() < world.annotator_noise) {
      if (!world.confusion.empty()) {
        pick = static_cast<int>(rng.categorical(
            std::vector<double>(world.confusion[category].row(member).begin(),
                                world.confusion[category].row(member).end())));
      } else {
        // uniform over the other members
        int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(m - 1)));
        pick = r >= member ? r + 1 : r;
      }
    }
    answers.push_back(cat.answers[pick]);
  }
  return answers;
}

std::vector<std::string> simulate_annotators(const std::string& true_answer,
                                             const WorldSpec& world, std::uint64_t seed) {
  const auto loc = world.find_answer(true_answer);
  if (!loc) throw std::invalid_argument("simulate_annotators: unknown answer '" + true_answer + "'");
  Rng rng(seed);
  return simulate_annotators(loc->first, loc->second, world, rng);
}

std::vector<std::vector<double>> answer_prototypes(const WorldSpec& world) {
  // Prototype geometry mirrors the annotator model: a category offset, a
  // ring placement so neighbors look alike, and a per-answer jitter that
  // keeps every prototype distinct.
  Rng rng(world.prototype_seed);
  const int dim = world.feature_dim;
  const double scale = world.prototype_scale;
  std::vector<std::vector<double>> protos;
  protos.reserve(world.answer_count());
  for (const Category& cat : world.categories) {
    std::vector<double> base(dim), u(dim), v(dim);
    for (double& x : base) x = rng.gaussian();
    for (double& x : u) x = rng.gaussian();
    for (double& x : v) x = rng.gaussian();
    const int m = static_cast<int>(cat.answers.size());
    for (int i = 0; i < m; ++i) {
      const double theta = 2.0 * 3.14159265358979323846 * i / m;
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      std::vector<double> p(dim);
      for (int d = 0; d < dim; ++d) {
        p[d] = scale * (1.2 * base[d] + c * u[d] + s * v[d] + 0.25 * rng.gaussian());
      }
      protos.push_back(std::move(p));
    }
  }
  return protos;
}

namespace {

std::vector<SynthRecord> gen_split(const WorldSpec& world,
                                   const std::vector<std::vector<double>>& priors,
                                   const std::vector<std::vector<double>>& protos, int count,
                                   const std::string& id_prefix, Rng& rng) {
  // global answer index base per category
  std::vector<int> base(world.categories.size(), 0);
  for (std::size_t c = 1; c < world.categories.size(); ++c) {
    base[c] = base[c - 1] + static_cast<int>(world.categories[c - 1].answers.size());
  }

  std::vector<SynthRecord> records;
  records.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int t = static_cast<int>(rng.below(world.templates.size()));
    const QuestionTemplate& tpl = world.templates[t];
    const int member = static_cast<int>(rng.categorical(priors[t]));
    const Category& cat = world.categories[tpl.category];

    SynthRecord rec;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%06d", id_prefix.c_str(), i);
    rec.annotation.question_id = idbuf;
    rec.annotation.question_tokens = tpl.tokens;
    rec.annotation.question_tokens.push_back(cat.keyword);

    rec.latent.template_id = tpl.id;
    rec.latent.true_answer = cat.answers[member];
    rec.latent.attributes = protos[base[tpl.category] + member];

    rec.annotation.scene.features.resize(world.feature_dim);
    for (int d = 0; d < world.feature_dim; ++d) {
      rec.annotation.scene.features[d] =
          rec.latent.attributes[d] + world.feature_noise * rng.gaussian();
    }

    rec.annotation.annotator_answers = simulate_annotators(tpl.category, member, world, rng);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::pair<std::vector<SynthRecord>, std::vector<SynthRecord>> gen_dataset(
    const WorldSpec& world, const PriorShiftConfig& shift, int n_train, int n_test,
    std::uint64_t seed) {
  world.validate();
  shift.validate(world);
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("gen_dataset: sizes must be >= 1");

  const std::vector<std::vector<double>> protos = answer_prototypes(world);
  Rng rng(seed);
  auto train = gen_split(world, shift.train_priors, protos, n_train, "tr", rng);
  auto test = gen_split(world, shift.test_priors, protos, n_test, "te", rng);
  return {std::move(train), std::move(test)};
}

void write_dataset(const std::vector<SynthRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const SynthRecord& rec : records) {
    ordered_json j;
    j["question_id"] = rec.annotation.question_id;
    std::string question;
    for (std::size_t i = 0; i < rec.annotation.question_tokens.size(); ++i) {
      if (i > 0) question += ' ';
      question += rec.annotation.question_tokens[i];
    }
    j["question"] = question;
    if (rec.annotation.scene.has_inline_features()) {
      j["scene"] = rec.annotation.scene.features;
    } else {
      j["scene"] = rec.annotation.scene.id;
    }
    j["answers"] = rec.annotation.annotator_answers;
    j["template"] = rec.latent.template_id;
    j["truth"] = rec.latent.true_answer;
    j["attributes"] = rec.latent.attributes;
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: '" + path + "'");
}

std::vector<SynthRecord> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::vector<SynthRecord> records;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fail = [&](const std::string& what) -> std::runtime_error {
      return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
    SynthRecord rec;
    try {
      rec.annotation.question_id = j.at("question_id").get<std::string>();
      const std::string question = j.at("question").get<std::string>();
      std::istringstream qs(question);
      std::string tok;
      while (qs >> tok) rec.annotation.question_tokens.push_back(tok);
      const json& scene = j.at("scene");
      if (scene.is_string()) {
        rec.annotation.scene.id = scene.get<std::string>();
      } else {
        rec.annotation.scene.features = scene.get<std::vector<double>>();
      }
      rec.annotation.annotator_answers = j.at("answers").get<std::vector<std::string>>();
      rec.latent.template_id = j.at("template").get<std::string>();
      rec.latent.true_answer = j.at("truth").get<std::string>();
      rec.latent.attributes = j.at("attributes").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw fail(e.what());
    }
    if (rec.annotation.annotator_answers.size() != kAnnotatorsPerQuestion) {
      throw fail("expected " + std::to_string(kAnnotatorsPerQuestion) + " answers");
    }
    if (!seen_ids.insert(rec.annotation.question_id).second) {
      throw fail("duplicate question_id '" + rec.annotation.question_id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

WordVectorLexicon gen_category_lexicon(const WorldSpec& world, int dim, double spread,
                                       std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("gen_category_lexicon: dim must be positive");
  Rng rng(seed);
  WordVectorLexicon lexicon;
  lexicon.dim = dim;
  for (const Category& cat : world.categories) {
    std::vector<double> centroid(dim);
    for (double& v : centroid) v = rng.gaussian();
    for (const std::string& answer : cat.answers) {
      std::istringstream ts(answer);
      std::string token;
      while (ts >> token) {
        if (lexicon.contains(token)) continue;  // first category keeps a shared token
        std::vector<double> v(dim);
        for (int d = 0; d < dim; ++d) v[d] = centroid[d] + spread * rng.gaussian();
        lexicon.vectors[token] = std::move(v);
      }
    }
  }
  return lexicon;
}

}  // namespace vqasem
