#include "mgvton/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mgvton/checkpoint.hpp"
#include "mgvton/pipeline.hpp"
#include "mgvton/synthetic_data.hpp"

namespace mgvton {

namespace nn = torch::nn;

std::vector<double> SsimConfig::taps() const {
  std::vector<double> t(window);
  const double c = (window - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    t[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += t[i];
  }
  for (auto& v : t) v /= sum;
  return t;
}

std::vector<double> luma(const Image& image) {
  std::vector<double> y(static_cast<std::size_t>(image.height()) * image.width());
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      y[static_cast<std::size_t>(r) * image.width() + c] =
          0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) + 0.114 * image.at(r, c, 2);
    }
  }
  return y;
}

namespace {

// 'valid' separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int oh = h - k + 1;
  const int ow = w - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += taps[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += taps[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

ScoreSummary summarize(const std::vector<double>& v) {
  ScoreSummary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

}  // namespace

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int h, int w, const SsimConfig& cfg) {
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(h) * w) {
    throw std::invalid_argument("ssim: planes differ in size");
  }
  if (h < cfg.window || w < cfg.window) throw std::invalid_argument("ssim: image smaller than the window");
  const auto taps = cfg.taps();
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, taps);
  const auto mu_b = filter_valid(b, h, w, taps);
  const auto e_aa = filter_valid(aa, h, w, taps);
  const auto e_bb = filter_valid(bb, h, w, taps);
  const auto e_ab = filter_valid(ab, h, w, taps);
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma2 = mu_a[i] * mu_a[i];
    const double mb2 = mu_b[i] * mu_b[i];
    const double mab = mu_a[i] * mu_b[i];
    const double va = e_aa[i] - ma2;
    const double vb = e_bb[i] - mb2;
    const double cov = e_ab[i] - mab;
    total += ((2.0 * mab + c1) * (2.0 * cov + c2)) / ((ma2 + mb2 + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double ssim(const Image& a, const Image& b, const SsimConfig& config) {
  if (a.resolution() != b.resolution()) throw std::invalid_argument("ssim: images differ in size");
  return ssim_plane(luma(a), luma(b), a.height(), a.width(), config);
}

ScoreSummary inception_score(const std::vector<std::vector<double>>& posteriors, int splits) {
  if (splits < 1) throw std::invalid_argument("inception score needs at least one split");
  if (posteriors.size() < static_cast<std::size_t>(2 * splits)) {
    throw std::invalid_argument("inception score needs at least 2 images per split");
  }
  const std::size_t classes = posteriors.front().size();
  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    std::vector<const std::vector<double>*> members;
    for (std::size_t i = s; i < posteriors.size(); i += splits) {
      if (posteriors[i].size() != classes) throw std::invalid_argument("posteriors differ in length");
      members.push_back(&posteriors[i]);
    }
    // Shifted mean: exact when every member equals the first.
    const auto& first = *members.front();
    std::vector<double> marginal(first);
    const double n = static_cast<double>(members.size());
    for (std::size_t c = 0; c < classes; ++c) {
      double shift = 0.0;
      for (const auto* p : members) shift += (*p)[c] - first[c];
      marginal[c] += shift / n;
    }
    double kl_sum = 0.0;
    for (const auto* p : members) {
      double kl = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        const double q = (*p)[c];
        if (q > 0.0) kl += q * (std::log(q) - std::log(marginal[c]));
      }
      kl_sum += kl;
    }
    scores.push_back(std::exp(kl_sum / n));
  }
  return summarize(scores);
}

ToyClassifierImpl::ToyClassifierImpl() {
  features_ = nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3, 16, 3).padding(1)), nn::ReLU(),
                             nn::Conv2d(nn::Conv2dOptions(16, 32, 3).stride(2).padding(1)), nn::ReLU(),
                             nn::Conv2d(nn::Conv2dOptions(32, 64, 3).stride(2).padding(1)), nn::ReLU(),
                             nn::Conv2d(nn::Conv2dOptions(64, 64, 3).stride(2).padding(1)), nn::ReLU(),
                             nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)));
  register_module("features", features_);
  head_ = register_module("head", nn::Linear(64, kToyClasses));
}

torch::Tensor ToyClassifierImpl::forward(const torch::Tensor& images) {
  return head_->forward(features_->forward(images).flatten(1));
}

ToyClassifier train_toy_classifier(Resolution resolution, const ToyClassifierTraining& o) {
  std::vector<torch::Tensor> images;
  std::vector<int64_t> labels;
  for (int i = 0; images.size() < static_cast<std::size_t>(o.samples); ++i) {
    const auto seed = mix_seed(o.seed, 5000 + i);
    const auto person = PersonSpec::sample(mix_seed(seed, 1));
    const auto clothes = ClothesSpec::sample(mix_seed(seed, 2));
    Rng rng(mix_seed(seed, 3));
    const auto pose = PoseSpec::sample(rng, person);
    images.push_back(render_person(person, clothes, pose, resolution).image.to_tensor());
    labels.push_back(static_cast<int>(clothes.pattern) * 3 + pose.raised_arms(person));
  }
  const auto x = torch::stack(images);
  const auto y = torch::tensor(labels, torch::kInt64);

  torch::manual_seed(o.seed);
  ToyClassifier model;
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(o.lr));
  Rng rng(mix_seed(o.seed, 1));
  std::vector<int64_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(static_cast<int>(i))]);
    for (std::size_t s = 0; s < order.size(); s += o.batch_size) {
      const std::vector<int64_t> chunk(order.begin() + s,
                                       order.begin() + std::min(order.size(), s + static_cast<std::size_t>(o.batch_size)));
      const auto idx = torch::tensor(chunk, torch::kInt64);
      const auto loss = torch::nn::functional::cross_entropy(model->forward(x.index_select(0, idx)), y.index_select(0, idx));
      opt.zero_grad();
      loss.backward();
      opt.step();
    }
  }
  model->eval();
  return model;
}

ToyClassifier load_or_train_classifier(const std::filesystem::path& path, Resolution resolution) {
  if (std::filesystem::exists(path)) {
    const auto ckpt = Checkpoint::load(path);
    if (ckpt.stage == "classifier" && ckpt.meta("resolution") == resolution.to_string()) {
      ToyClassifier model;
      ckpt.load_module("classifier", *model);
      model->eval();
      return model;
    }
  }
  auto model = train_toy_classifier(resolution);
  Checkpoint ckpt;
  ckpt.stage = "classifier";
  ckpt.metadata["resolution"] = resolution.to_string();
  ckpt.add_module("classifier", *model);
  ckpt.save(path);
  return model;
}

std::vector<std::vector<double>> classify(ToyClassifier& classifier, const std::vector<Image>& images) {
  torch::NoGradGuard guard;
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < images.size(); s += 32) {
    std::vector<torch::Tensor> batch;
    for (std::size_t i = s; i < std::min(images.size(), s + 32); ++i) batch.push_back(images[i].to_tensor());
    const auto probs = torch::softmax(classifier->forward(torch::stack(batch)), 1).to(torch::kFloat64).contiguous();
    const auto acc = probs.accessor<double, 2>();
    for (int64_t i = 0; i < probs.size(0); ++i) {
      std::vector<double> row(kToyClasses);
      for (int c = 0; c < kToyClasses; ++c) row[c] = acc[i][c];
      out.push_back(std::move(row));
    }
  }
  return out;
}

ScoreSummary inception_score(const std::vector<Image>& images, ToyClassifier& classifier, int splits) {
  return inception_score(classify(classifier, images), splits);
}

std::string EvaluationReport::to_tsv() const {
  std::ostringstream out;
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "model\tssim_mean\tssim_std\tis_mean\tis_std\tn\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%d\n", r.model.c_str(), r.ssim.mean, r.ssim.std,
                  r.is.mean, r.is.std, r.n);
    out << buf;
  }
  return out.str();
}

std::vector<std::string> report_variants() { return {"full", "wo_render", "copy_source", "ground_truth"}; }

std::vector<ShuffledCase> shuffled_cases(const DatasetManifest& manifest, const std::vector<Triplet>& tests,
                                         std::size_t min_count) {
  std::vector<TripletSpec> specs;
  for (const auto& t : tests) {
    bool found = false;
    for (const auto& e : manifest.entries) {
      if (e.id == t.id) {
        specs.push_back(TripletSpec::sample(e.seed));
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("triplet " + t.id + " is not in the manifest");
  }
  const int n = static_cast<int>(tests.size());
  std::vector<ShuffledCase> cases;
  for (int round = 1; cases.size() < min_count && round <= 4 * n + 8; ++round) {
    for (int i = 0; i < n && cases.size() < min_count; ++i) {
      ShuffledCase c;
      c.person = i;
      c.clothes = (i + round) % n;
      c.pose = (i + 2 * round + 1) % n;
      RenderedPerson truth;
      try {
        truth = render_person(specs[i].person, specs[c.clothes].clothes, specs[c.pose].target_pose,
                              manifest.resolution);
      } catch (const std::invalid_argument&) {
        continue;  // pose does not fit this person's proportions on the canvas
      }
      c.request = TryOnRequest{tests[i].source, tests[c.clothes].clothes, tests[c.clothes].clothes_mask,
                               truth.keypoints};
      c.truth = std::move(truth.image);
      cases.push_back(std::move(c));
    }
  }
  return cases;
}

EvaluationReport evaluate_testset(const std::filesystem::path& checkpoints, const std::filesystem::path& dataset,
                                  const std::vector<std::string>& variants, int splits) {
  const auto manifest = read_manifest(dataset);
  const auto tests = load_split(dataset, "test");
  if (tests.empty()) throw std::invalid_argument("the test split of " + dataset.string() + " is empty");
  for (const auto& v : variants) {
    const auto known = report_variants();
    if (std::find(known.begin(), known.end(), v) == known.end()) throw std::invalid_argument("unknown variant " + v);
  }
  auto pipeline = Pipeline::load(checkpoints);
  if (pipeline.resolution() != manifest.resolution) {
    throw std::invalid_argument("dataset resolution " + manifest.resolution.to_string() +
                                " does not match the checkpoints' " + pipeline.resolution().to_string());
  }

  std::vector<TryOnRequest> paired;
  for (const auto& t : tests) paired.push_back({t.source, t.clothes, t.clothes_mask, t.target.keypoints});
  const auto paired_out = pipeline.run(paired);

  const auto cases = shuffled_cases(manifest, tests, static_cast<std::size_t>(2 * splits));
  if (cases.size() < static_cast<std::size_t>(2 * splits)) {
    throw std::invalid_argument("too few shuffled test combinations for " + std::to_string(splits) + " IS splits");
  }
  std::vector<TryOnRequest> shuffled;
  for (const auto& c : cases) shuffled.push_back(c.request);
  const auto shuffled_out = pipeline.run(shuffled);
  auto classifier = load_or_train_classifier(checkpoints / "classifier.ckpt", manifest.resolution);

  auto pick = [](const std::string& variant, const TryOnResult& r, const Image& reference, const Image& truth)
      -> const Image& {
    if (variant == "full") return r.final_image;
    if (variant == "wo_render") return r.coarse;
    if (variant == "copy_source") return reference;
    return truth;
  };

  EvaluationReport report;
  report.header_comments = {
      "ssim: luma (ITU-R BT.601), gaussian window 11x11 sigma 1.5, K1 0.01, K2 0.03, valid windows, paired test "
      "triplets",
      "is: toy classifier over 9 classes (clothes pattern x raised arms), splits " + std::to_string(splits) + ", " +
          std::to_string(cases.size()) + " shuffled (person, clothes, pose) combinations",
      "is values are comparable only under this classifier"};
  for (const auto& v : variants) {
    std::vector<double> ssims;
    for (std::size_t i = 0; i < tests.size(); ++i) {
      ssims.push_back(ssim(pick(v, paired_out[i], tests[i].source.image, tests[i].target.image), tests[i].target.image));
    }
    std::vector<Image> generated;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      generated.push_back(pick(v, shuffled_out[i], cases[i].request.person.image, cases[i].truth));
    }
    report.rows.push_back({v, summarize(ssims), inception_score(generated, classifier, splits),
                           static_cast<int>(tests.size())});
  }
  return report;
}

}  // namespace mgvton
