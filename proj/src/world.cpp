#include "distcap/world.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace distcap {
namespace {

constexpr uint64_t kWorldStream = 0x77;

uint64_t mask_bits(const std::array<bool, Schema::kAttributeCount>& mentioned) {
  uint64_t b = 0;
  for (int a = 0; a < Schema::kAttributeCount; ++a)
    if (mentioned[a]) b |= uint64_t{1} << a;
  return b;
}

}  // namespace

std::vector<TokenId> content_tokens(const std::vector<TokenId>& tokens) {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (TokenId t : tokens)
    if (t != Vocabulary::kBos && t != Vocabulary::kEos) out.push_back(t);
  return out;
}

Caption render_caption(const Scene& scene,
                       const std::array<bool, Schema::kAttributeCount>& mentioned) {
  if (!mentioned[Schema::kObject] || !mentioned[Schema::kColor])
    throw std::invalid_argument("render_caption: mandatory attributes must be mentioned");
  const Vocabulary& vocab = Vocabulary::instance();
  for (int a = 0; a < Schema::kAttributeCount; ++a)
    if (scene.attributes[a] < 0 || scene.attributes[a] >= Schema::kValuesPerAttribute)
      throw std::out_of_range("render_caption: attribute value outside vocabulary");

  // Surface variant is a pure draw from (id, attributes, mentioned subset).
  uint64_t h = fnv1a(&scene.id, sizeof(scene.id));
  h = fnv1a(scene.attributes.data(), sizeof(int) * scene.attributes.size(), h);
  uint64_t mb = mask_bits(mentioned);
  h = fnv1a(&mb, sizeof(mb), h);
  int variant = static_cast<int>(splitmix64(h) % 3);

  auto attr = [&](Schema::Attribute a) {
    return vocab.attribute_token(a, scene.attributes[a]);
  };
  auto fn = [&](const char* w) { return vocab.function_token(w); };

  std::vector<TokenId> t;
  t.push_back(Vocabulary::kBos);
  switch (variant) {
    case 0:
      // there is a [size] [color] [object] on a [bg] at the [pos] group of [count]
      t.push_back(fn("there"));
      t.push_back(fn("is"));
      t.push_back(fn("a"));
      if (mentioned[Schema::kSize]) t.push_back(attr(Schema::kSize));
      t.push_back(attr(Schema::kColor));
      t.push_back(attr(Schema::kObject));
      if (mentioned[Schema::kBackground]) {
        t.push_back(fn("on"));
        t.push_back(fn("a"));
        t.push_back(attr(Schema::kBackground));
      }
      if (mentioned[Schema::kPosition]) {
        t.push_back(fn("at"));
        t.push_back(fn("the"));
        t.push_back(attr(Schema::kPosition));
      }
      if (mentioned[Schema::kCount]) {
        t.push_back(fn("group"));
        t.push_back(fn("of"));
        t.push_back(attr(Schema::kCount));
      }
      break;
    case 1:
      // the [size] [color] [object] is here by the [bg] near the [pos] with [count]
      t.push_back(fn("the"));
      if (mentioned[Schema::kSize]) t.push_back(attr(Schema::kSize));
      t.push_back(attr(Schema::kColor));
      t.push_back(attr(Schema::kObject));
      t.push_back(fn("is"));
      t.push_back(fn("here"));
      if (mentioned[Schema::kBackground]) {
        t.push_back(fn("by"));
        t.push_back(fn("the"));
        t.push_back(attr(Schema::kBackground));
      }
      if (mentioned[Schema::kPosition]) {
        t.push_back(fn("near"));
        t.push_back(fn("the"));
        t.push_back(attr(Schema::kPosition));
      }
      if (mentioned[Schema::kCount]) {
        t.push_back(fn("with"));
        t.push_back(attr(Schema::kCount));
      }
      break;
    default:
      // see a [count] [size] [color] [object] on the [bg] at the [pos] here
      t.push_back(fn("see"));
      t.push_back(fn("a"));
      if (mentioned[Schema::kCount]) t.push_back(attr(Schema::kCount));
      if (mentioned[Schema::kSize]) t.push_back(attr(Schema::kSize));
      t.push_back(attr(Schema::kColor));
      t.push_back(attr(Schema::kObject));
      if (mentioned[Schema::kBackground]) {
        t.push_back(fn("on"));
        t.push_back(fn("the"));
        t.push_back(attr(Schema::kBackground));
      }
      if (mentioned[Schema::kPosition]) {
        t.push_back(fn("at"));
        t.push_back(fn("the"));
        t.push_back(attr(Schema::kPosition));
      }
      t.push_back(fn("here"));
      break;
  }
  t.push_back(Vocabulary::kEos);

  Caption c;
  c.tokens = std::move(t);
  c.provenance = Provenance::kGroundTruth;
  c.scene_id = scene.id;
  return c;
}

WorldDataset generate_world(uint64_t seed, int n_scenes, const SalienceProfile& profile,
                            int n_test) {
  if (n_scenes < 2) throw std::invalid_argument("generate_world: need at least 2 scenes");
  if (n_test < 0 || n_test >= n_scenes)
    throw std::invalid_argument("generate_world: n_test must be in [0, n_scenes)");
  for (double p : profile)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("generate_world: salience probabilities must be in [0,1]");
  if (profile[Schema::kObject] != 1.0 || profile[Schema::kColor] != 1.0)
    throw std::invalid_argument("generate_world: object and color salience must be 1");

  Rng rng(derive_seed(seed, kWorldStream));
  WorldDataset world;
  world.scenes.reserve(n_scenes);
  world.gt_captions.reserve(n_scenes);
  world.n_train = n_scenes - n_test;

  // Distinct tuples guarantee that an all-ones profile yields all-distinct
  // captions; with 8^6 tuples rejections are rare at lab scale.
  std::set<std::array<int, Schema::kAttributeCount>> used;
  for (int id = 0; id < n_scenes; ++id) {
    Scene s;
    s.id = id;
    do {
      for (int a = 0; a < Schema::kAttributeCount; ++a)
        s.attributes[a] = static_cast<int>(rng.uniform_int(Schema::kValuesPerAttribute));
    } while (!used.insert(s.attributes).second);

    std::array<bool, Schema::kAttributeCount> mentioned{};
    mentioned[Schema::kObject] = true;
    mentioned[Schema::kColor] = true;
    // One draw per optional attribute regardless of outcome keeps the stream
    // aligned across profiles.
    for (int a = 0; a < Schema::kAttributeCount; ++a) {
      if (a == Schema::kObject || a == Schema::kColor) continue;
      double u = rng.uniform01();
      mentioned[a] = u < profile[a];
    }

    world.gt_captions.push_back(render_caption(s, mentioned));
    world.scenes.push_back(std::move(s));
  }
  world.neighbor_lists.assign(n_scenes, {});
  return world;
}

std::vector<std::vector<SceneId>> mine_similar_images(const WorldDataset& dataset, int m) {
  int n = dataset.n_scenes();
  if (m < 0 || m >= n) throw std::invalid_argument("mine_similar_images: need 0 <= m < n_scenes");
  for (const Scene& s : dataset.scenes)
    if (s.embedding.size() == 0)
      throw std::invalid_argument("mine_similar_images: scene embeddings not computed");

  std::vector<std::vector<SceneId>> lists(n);
  if (m == 0) return lists;

  int d = static_cast<int>(dataset.scenes[0].embedding.size());
  Mat E(n, d);
  for (int i = 0; i < n; ++i) {
    const Vec& e = dataset.scenes[i].embedding;
    Scalar norm = e.norm();
    E.row(i) = e.transpose();
    if (norm > 0) E.row(i) /= norm;
  }
  Mat sims = E * E.transpose();

  parallel_for(n, [&](int i) {
    std::vector<SceneId> order(n - 1);
    int k = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) order[k++] = j;
    std::sort(order.begin(), order.end(), [&](SceneId a, SceneId b) {
      if (sims(i, a) != sims(i, b)) return sims(i, a) > sims(i, b);
      return a < b;
    });
    order.resize(m);
    lists[i] = std::move(order);
  });
  return lists;
}

void save_world(const WorldDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot open world file for writing: " + path);
  out << "distcap-world 1\n";
  out << "scenes " << dataset.n_scenes() << " train " << dataset.n_train << "\n";
  for (int i = 0; i < dataset.n_scenes(); ++i) {
    const Scene& s = dataset.scenes[i];
    out << "scene " << s.id;
    out << " attrs";
    for (int a : s.attributes) out << ' ' << a;
    const auto& gt = dataset.gt_captions[i].tokens;
    out << " gt " << gt.size();
    for (TokenId t : gt) out << ' ' << t;
    const auto& nn = dataset.neighbor_lists[i];
    out << " nn " << nn.size();
    for (SceneId id : nn) out << ' ' << id;
    out << "\n";
  }
  if (!out) throw UserError("write failed: " + path);
}

WorldDataset load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open world file: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "distcap-world" || version != 1)
    throw UserError("not a world file (bad header): " + path);

  std::string key;
  int n = 0, n_train = 0;
  in >> key >> n;
  if (key != "scenes" || n < 0) throw UserError("corrupt world file: " + path);
  in >> key >> n_train;
  if (key != "train") throw UserError("corrupt world file: " + path);

  WorldDataset world;
  world.n_train = n_train;
  world.scenes.resize(n);
  world.gt_captions.resize(n);
  world.neighbor_lists.resize(n);
  for (int i = 0; i < n; ++i) {
    Scene& s = world.scenes[i];
    in >> key >> s.id;
    if (key != "scene") throw UserError("corrupt world file: " + path);
    in >> key;
    if (key != "attrs") throw UserError("corrupt world file: " + path);
    for (int a = 0; a < Schema::kAttributeCount; ++a) in >> s.attributes[a];
    size_t len = 0;
    in >> key >> len;
    if (key != "gt") throw UserError("corrupt world file: " + path);
    Caption& c = world.gt_captions[i];
    c.scene_id = s.id;
    c.provenance = Provenance::kGroundTruth;
    c.tokens.resize(len);
    for (auto& t : c.tokens) in >> t;
    size_t m = 0;
    in >> key >> m;
    if (key != "nn") throw UserError("corrupt world file: " + path);
    world.neighbor_lists[i].resize(m);
    for (auto& id : world.neighbor_lists[i]) in >> id;
    if (!in) throw UserError("corrupt world file: " + path);
  }
  return world;
}

std::string caption_to_string(const std::vector<TokenId>& tokens) {
  const Vocabulary& vocab = Vocabulary::instance();
  std::string out;
  for (TokenId t : tokens) {
    if (t == Vocabulary::kBos || t == Vocabulary::kEos) continue;
    if (!out.empty()) out += ' ';
    out += vocab.word(t);
  }
  return out;
}

}  // namespace distcap
