#include "bogen/artifacts.hpp"

#include "bogen/error.hpp"

#include <spdlog/spdlog.h>

namespace bogen {

const ShapeExtrinsic* Artifacts::find_shape(const std::string& id) const {
  const std::size_t i = corpus.find(id);
  return i == Corpus::npos ? nullptr : &corpus.shapes[i];
}

std::shared_ptr<const Artifacts> make_artifacts(Corpus corpus, VaeModel vae, LandmarkSet landmarks) {
  auto a = std::make_shared<Artifacts>();
  a->corpus = std::move(corpus);
  a->vae = std::move(vae);
  a->landmarks = std::move(landmarks);
  a->corpus_latents = encode_means(a->corpus.vectors(), a->vae);
  for (std::size_t i = 0; i < a->corpus.size(); ++i) {
    for (const auto& t : a->corpus.shapes[i].tags) a->tag_index[t].push_back(i);
  }
  for (const auto& [tag, idx] : a->tag_index) {
    LatentPoint2D c{};
    for (std::size_t i : idx) {
      c.z1 += a->corpus_latents[i].z1;
      c.z2 += a->corpus_latents[i].z2;
    }
    c.z1 /= static_cast<double>(idx.size());
    c.z2 /= static_cast<double>(idx.size());
    a->tag_centroids[tag] = c;
  }
  for (const auto& l : a->landmarks.landmarks) {
    if (l.corpus_index >= a->corpus.size() || a->corpus.shapes[l.corpus_index].id != l.shape_id) {
      throw InvalidData("landmark " + l.shape_id + " does not match the corpus");
    }
  }
  return a;
}

std::shared_ptr<const Artifacts> load_artifacts(const ArtifactPaths& paths) {
  for (const auto* p : {&paths.corpus, &paths.vae, &paths.landmarks}) {
    if (p->empty() || !std::filesystem::exists(*p)) throw MissingArtifact(p->string());
  }
  Corpus corpus = load_corpus(paths.corpus);
  VaeModel vae = load_vae(paths.vae);
  LandmarkSet landmarks = load_landmarks(paths.landmarks);
  try {
    return make_artifacts(std::move(corpus), std::move(vae), std::move(landmarks));
  } catch (const InvalidData& e) {
    throw FileError(paths.landmarks.string(), e.what());
  }
}

std::shared_ptr<const Artifacts> build_artifacts(const PipelineOptions& options) {
  Corpus corpus = generate_corpus(options.corpus_size, options.corpus_seed);
  spdlog::info("training vae on {} shapes for {} epochs", corpus.size(), options.vae.epochs);
  TrainedVae trained = train_vae(corpus.vectors(), options.vae);
  const auto latents = encode_means(corpus.vectors(), trained.model);
  std::vector<std::string> ids;
  for (const auto& s : corpus.shapes) ids.push_back(s.id);
  LandmarkSet landmarks = select_landmarks(latents, ids, options.landmark_count, options.landmark_seed);
  return make_artifacts(std::move(corpus), std::move(trained.model), std::move(landmarks));
}

} // namespace bogen
