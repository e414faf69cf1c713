#include "distcap/retriever.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <fstream>

namespace distcap {
namespace {

constexpr uint64_t kRetrieverStream = 0x52;

Vec noise_row(Rng& rng, int d, double amplitude) {
  Vec g(d);
  for (int i = 0; i < d; ++i) g[i] = rng.normal();
  return amplitude / std::sqrt(static_cast<double>(d)) * g;
}

void write_matrix(std::ofstream& out, const char* name, const Mat& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << fmt_g17(m(r, c));
    }
    out << '\n';
  }
}

Mat read_matrix(std::ifstream& in, const std::string& expected_name, const std::string& path) {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  in >> name >> rows >> cols;
  if (name != expected_name || rows < 0 || cols < 0)
    throw UserError("corrupt retriever file: " + path);
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) in >> m(r, c);
  if (!in) throw UserError("corrupt retriever file: " + path);
  return m;
}

}  // namespace

RetrieverParams build_retriever(uint64_t seed, int d, double noise_amplitude) {
  constexpr int A = Schema::kTotalAttributeValues;
  if (d < A) throw std::invalid_argument("build_retriever: d must be at least 48");
  if (noise_amplitude < 0) throw std::invalid_argument("build_retriever: negative noise");

  Rng rng(derive_seed(seed, kRetrieverStream));
  Mat G(d, A);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < A; ++c) G(r, c) = rng.normal();
  // Thin Q gives 48 orthonormal columns shared by both projections.
  Eigen::HouseholderQR<Mat> qr(G);
  Mat base = (qr.householderQ() * Mat::Identity(d, A)).transpose();  // A x d

  const Vocabulary& vocab = Vocabulary::instance();
  RetrieverParams params;
  params.noise_amplitude = noise_amplitude;
  params.text_projection = Mat::Zero(vocab.size(), d);
  for (TokenId t = 0; t < vocab.size(); ++t) {
    Vec row = noise_row(rng, d, noise_amplitude);
    if (vocab.is_attribute_token(t)) row += base.row(t - 2).transpose();
    params.text_projection.row(t) = row.transpose();
  }
  params.image_projection = Mat::Zero(A, d);
  for (int i = 0; i < A; ++i)
    params.image_projection.row(i) = base.row(i) + noise_row(rng, d, noise_amplitude).transpose();
  params.frozen = true;
  return params;
}

Vec embed_text(const std::vector<TokenId>& tokens, const RetrieverParams& params) {
  std::vector<TokenId> content = content_tokens(tokens);
  if (content.empty())
    throw std::invalid_argument("embed_text: caption has no content tokens");
  std::sort(content.begin(), content.end());
  content.erase(std::unique(content.begin(), content.end()), content.end());

  Vec sum = Vec::Zero(params.dim());
  for (TokenId t : content) {
    if (t < 0 || t >= params.text_projection.rows())
      throw std::out_of_range("embed_text: token id outside projection");
    sum += params.text_projection.row(t).transpose();
  }
  Scalar norm = sum.norm();
  if (norm < 1e-12) throw std::runtime_error("embed_text: degenerate zero embedding");
  return sum / norm;
}

Vec embed_image(const Scene& scene, const RetrieverParams& params) {
  Vec sum = Vec::Zero(params.dim());
  for (int a = 0; a < Schema::kAttributeCount; ++a) {
    int v = scene.attributes[a];
    if (v < 0 || v >= Schema::kValuesPerAttribute)
      throw std::out_of_range("embed_image: attribute value outside vocabulary");
    sum += params.image_projection.row(a * Schema::kValuesPerAttribute + v).transpose();
  }
  Scalar norm = sum.norm();
  if (norm < 1e-12) throw std::runtime_error("embed_image: degenerate zero embedding");
  return sum / norm;
}

Scalar similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("similarity: dimension mismatch");
  return a.dot(b);
}

Scalar recall_at_k(const Mat& queries, const Mat& gallery, const std::vector<int>& pairing,
                   int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  if (k > gallery.rows()) throw std::invalid_argument("recall_at_k: k exceeds gallery size");
  if (static_cast<Eigen::Index>(pairing.size()) != queries.rows())
    throw std::invalid_argument("recall_at_k: pairing size mismatch");
  std::vector<bool> seen(gallery.rows(), false);
  for (int j : pairing) {
    if (j < 0 || j >= gallery.rows() || seen[j])
      throw std::invalid_argument("recall_at_k: pairing must be injective into the gallery");
    seen[j] = true;
  }

  Mat sims = queries * gallery.transpose();
  int hits = 0;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    int paired = pairing[q];
    Scalar s_pos = sims(q, paired);
    int rank = 1;
    for (Eigen::Index j = 0; j < gallery.rows(); ++j) {
      if (j == paired) continue;
      if (sims(q, j) > s_pos || (sims(q, j) == s_pos && j < paired)) ++rank;
    }
    if (rank <= k) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(queries.rows());
}

uint64_t retriever_hash(const RetrieverParams& params) {
  uint64_t h = hash_matrix(params.text_projection);
  return hash_matrix(params.image_projection, h);
}

void save_retriever(const RetrieverParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot open retriever file for writing: " + path);
  out << "distcap-retriever 1 " << fmt_g17(params.noise_amplitude) << '\n';
  write_matrix(out, "text", params.text_projection);
  write_matrix(out, "image", params.image_projection);
  if (!out) throw UserError("write failed: " + path);
}

RetrieverParams load_retriever(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open retriever file: " + path);
  std::string magic;
  int version = 0;
  RetrieverParams params;
  in >> magic >> version >> params.noise_amplitude;
  if (magic != "distcap-retriever" || version != 1)
    throw UserError("not a retriever file (bad header): " + path);
  params.text_projection = read_matrix(in, "text", path);
  params.image_projection = read_matrix(in, "image", path);
  params.frozen = true;
  return params;
}

void embed_world(WorldDataset& dataset, const RetrieverParams& params) {
  parallel_for(dataset.n_scenes(),
               [&](int i) { dataset.scenes[i].embedding = embed_image(dataset.scenes[i], params); });
}

void save_embeddings(const WorldDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot open embedding cache for writing: " + path);
  Eigen::Index d = dataset.scenes.empty() ? 0 : dataset.scenes.front().embedding.size();
  out << "distcap-embeddings 1\n" << dataset.n_scenes() << ' ' << d << '\n';
  for (const Scene& scene : dataset.scenes) {
    if (scene.embedding.size() != d)
      throw std::invalid_argument("save_embeddings: scene " + std::to_string(scene.id) +
                                  " has no embedding");
    out << scene.id;
    for (Eigen::Index c = 0; c < d; ++c) out << ' ' << fmt_g17(scene.embedding[c]);
    out << '\n';
  }
  if (!out) throw UserError("write failed: " + path);
}

void load_embeddings(WorldDataset& dataset, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open embedding cache: " + path);
  std::string magic;
  int version = 0, n = 0;
  Eigen::Index d = 0;
  in >> magic >> version >> n >> d;
  if (magic != "distcap-embeddings" || version != 1)
    throw UserError("not an embedding cache (bad header): " + path);
  if (n != dataset.n_scenes())
    throw UserError("embedding cache does not match the dataset: " + path);
  for (Scene& scene : dataset.scenes) {
    SceneId id = -1;
    in >> id;
    if (id != scene.id) throw UserError("embedding cache scene order mismatch: " + path);
    scene.embedding.resize(d);
    for (Eigen::Index c = 0; c < d; ++c) in >> scene.embedding[c];
  }
  if (!in) throw UserError("corrupt embedding cache: " + path);
}

}  // namespace distcap
