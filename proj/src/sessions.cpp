#include "fscil/sessions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "fscil/error.hpp"
#include "fscil/kernels.hpp"
#include "fscil/log.hpp"
#include "fscil/losses.hpp"

namespace fscil {

namespace {

// child-stream tags off the run seed; stages never share a stream
constexpr std::uint64_t kTagModelInit = 0x01;
constexpr std::uint64_t kTagStage1 = 0x02;
constexpr std::uint64_t kTagVirtual = 0x03;
constexpr std::uint64_t kTagStage2 = 0x04;
constexpr std::uint64_t kTagSession = 0x100;  // + session id

const char* kZeroNormWarning = "ncm: zero-norm feature scored below every class";

std::vector<int> labels_of(const ImageSet& set) {
  std::vector<int> out;
  out.reserve(set.samples.size());
  for (const ImageSample& s : set.samples) out.push_back(s.label);
  return out;
}

void bind_fingerprint(PipelineState& st, const ImageSet& train, const ImageSet& test) {
  const std::uint64_t fp = dataset_fingerprint(train, test);
  if (st.data_fingerprint == 0) {
    st.data_fingerprint = fp;
  } else if (st.data_fingerprint != fp) {
    throw ProtocolError("dataset differs from the one this run started on");
  }
}

SeparationStats measure_separation(const FeatureDataset& feats, std::size_t n_classes) {
  std::vector<Vec> mean(n_classes, Vec(feats.dim, 0.0));
  std::vector<std::size_t> count(n_classes, 0);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto c = static_cast<std::size_t>(feats.labels[i]);
    for (std::size_t k = 0; k < feats.dim; ++k) mean[c][k] += feats.features[i][k];
    ++count[c];
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (count[c] == 0) throw ProtocolError("separation: class without samples");
    for (double& v : mean[c]) v /= static_cast<double>(count[c]);
  }
  SeparationStats stats;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto c = static_cast<std::size_t>(feats.labels[i]);
    stats.intra += euclidean_distance(feats.features[i], mean[c]);
  }
  stats.intra /= static_cast<double>(feats.size());
  stats.inter = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n_classes; ++a) {
    for (std::size_t b = a + 1; b < n_classes; ++b) {
      stats.inter = std::min(stats.inter, euclidean_distance(mean[a], mean[b]));
    }
  }
  return stats;
}

// Head-only SGD on a fixed feature set: cross-entropy, plus distillation of
// the first old_classes logit columns toward the teacher when one is given.
void train_head(ClassifierHead& head, const FeatureDataset& data,
                const ClassifierHead* teacher, std::size_t epochs, std::size_t batch,
                double lr, const PipelineConfig& cfg, Rng& rng) {
  const std::size_t n = data.size();
  if (n == 0) throw ProtocolError("head training set is empty");
  const std::size_t fd = head.dim();
  const std::size_t classes = head.classes();
  const std::size_t old_classes = teacher ? teacher->classes() : 0;
  SgdMomentum opt(lr, cfg.momentum, cfg.weight_decay);
  const std::size_t hw = opt.register_param(head.weight().size());
  const std::size_t hb = head.has_bias() ? opt.register_param(head.bias().size()) : 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Rng er = rng.derive(epoch);
    er.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      Mat f(b, fd);
      std::vector<std::size_t> labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t s = order[start + i];
        f.set_row(i, data.features[s]);
        labels[i] = static_cast<std::size_t>(data.labels[s]);
      }
      const Mat logits = head.logits(f);
      Mat tlogits;
      if (teacher) tlogits = teacher->logits(f);
      Mat dlogits(b, classes);
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        const LossGrads ce = ce_loss(logits.row_vec(i), labels[i]);
        for (std::size_t c = 0; c < classes; ++c) dlogits(i, c) = ce.dlogits[c] * inv_b;
        if (teacher && cfg.kd_beta > 0) {
          const Vec old_slice(logits.row(i), logits.row(i) + old_classes);
          const LossGrads kd =
              kd_loss(old_slice, tlogits.row_vec(i), cfg.kd_temperature, cfg.kd_direction);
          for (std::size_t c = 0; c < old_classes; ++c) {
            dlogits(i, c) += cfg.kd_beta * kd.dlogits[c] * inv_b;
          }
        }
      }
      Mat dw(classes, fd);
      kernels::linear_grad_weight(dlogits.data(), f.data(), b, fd, classes, dw.data());
      opt.step(hw, head.weight().data(), dw.data(), dw.size());
      if (head.has_bias()) {
        Vec db(classes, 0.0);
        kernels::linear_grad_bias(dlogits.data(), b, classes, db.data());
        opt.step(hb, head.bias().data(), db.data(), db.size());
      }
    }
  }
}

std::vector<int> ncm_predict(const FeatureDataset& feats,
                             const std::vector<ClassMemoryBank>& banks,
                             std::size_t n_classes, Similarity sim,
                             std::vector<std::string>& warnings) {
  std::vector<int> preds(feats.size(), 0);
  bool warned = false;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const Vec& f = feats.features[i];
    const double nf = norm(f);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const Vec& m = banks.at(c).mean;
      double score;
      if (sim == Similarity::cosine) {
        const double nm = norm(m);
        if (nf == 0.0 || nm == 0.0) {
          score = -2.0;  // below any reachable cosine
          warned = true;
        } else {
          score = dot(f, m) / (nf * nm);
        }
      } else {
        score = -euclidean_distance(f, m);
      }
      if (score > best) {
        best = score;
        arg = c;
      }
    }
    preds[i] = static_cast<int>(arg);
  }
  if (warned &&
      std::find(warnings.begin(), warnings.end(), kZeroNormWarning) == warnings.end()) {
    warnings.push_back(kZeroNormWarning);
    log::warn(kZeroNormWarning);
  }
  return preds;
}

}  // namespace

std::size_t session_of_class(int c, const PipelineConfig& cfg) {
  if (c < 0 || static_cast<std::size_t>(c) >= cfg.total_classes()) {
    throw ProtocolError("class id out of range: " + std::to_string(c));
  }
  const auto uc = static_cast<std::size_t>(c);
  if (uc < cfg.base_classes) return 0;
  return 1 + (uc - cfg.base_classes) / cfg.ways;
}

std::vector<int> classes_of_session(std::size_t s, const PipelineConfig& cfg) {
  if (s > cfg.incremental_sessions) {
    throw ProtocolError("session id out of range: " + std::to_string(s));
  }
  std::vector<int> out;
  if (s == 0) {
    for (std::size_t c = 0; c < cfg.base_classes; ++c) out.push_back(static_cast<int>(c));
  } else {
    const std::size_t first = cfg.base_classes + (s - 1) * cfg.ways;
    for (std::size_t c = first; c < first + cfg.ways; ++c) out.push_back(static_cast<int>(c));
  }
  return out;
}

std::vector<SessionSpec> make_session_specs(const std::vector<int>& train_labels,
                                            const std::vector<int>& test_labels,
                                            const PipelineConfig& cfg, Rng& rng) {
  const std::size_t total = cfg.total_classes();
  std::vector<std::vector<std::size_t>> train_of(total), test_of(total);
  for (std::size_t i = 0; i < train_labels.size(); ++i) {
    const int c = train_labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= total) {
      throw ProtocolError("train label out of range: " + std::to_string(c));
    }
    train_of[static_cast<std::size_t>(c)].push_back(i);
  }
  for (std::size_t i = 0; i < test_labels.size(); ++i) {
    const int c = test_labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= total) {
      throw ProtocolError("test label out of range: " + std::to_string(c));
    }
    test_of[static_cast<std::size_t>(c)].push_back(i);
  }
  std::vector<SessionSpec> specs(cfg.incremental_sessions + 1);
  for (std::size_t s = 0; s < specs.size(); ++s) {
    SessionSpec& spec = specs[s];
    spec.id = s;
    spec.classes = classes_of_session(s, cfg);
    for (const int c : spec.classes) {
      const auto uc = static_cast<std::size_t>(c);
      const std::vector<std::size_t>& pool = train_of[uc];
      if (s == 0) {
        if (pool.empty()) {
          throw ProtocolError("base class " + std::to_string(c) + " has no training samples");
        }
        spec.train_indices.insert(spec.train_indices.end(), pool.begin(), pool.end());
      } else {
        if (pool.size() < cfg.shots) {
          throw ProtocolError("class " + std::to_string(c) + " has fewer samples than shots");
        }
        Rng cr = rng.derive(static_cast<std::uint64_t>(c));
        std::vector<std::size_t> scratch(pool.size());
        std::iota(scratch.begin(), scratch.end(), 0);
        std::vector<std::size_t> picked(cfg.shots);
        for (std::size_t i = 0; i < cfg.shots; ++i) {
          const std::size_t j =
              i + static_cast<std::size_t>(cr.below(scratch.size() - i));
          std::swap(scratch[i], scratch[j]);
          picked[i] = scratch[i];
        }
        std::sort(picked.begin(), picked.end());
        for (const std::size_t p : picked) spec.train_indices.push_back(pool[p]);
      }
      if (test_of[uc].empty()) {
        throw ProtocolError("class " + std::to_string(c) + " has no test samples");
      }
      spec.test_indices.insert(spec.test_indices.end(), test_of[uc].begin(),
                               test_of[uc].end());
    }
  }
  return specs;
}

void validate_protocol(const std::vector<SessionSpec>& specs,
                       const std::vector<int>& train_labels,
                       const std::vector<int>& test_labels, const PipelineConfig& cfg) {
  if (specs.size() != cfg.incremental_sessions + 1) {
    throw ProtocolError("expected " + std::to_string(cfg.incremental_sessions + 1) +
                        " sessions, got " + std::to_string(specs.size()));
  }
  const std::size_t total = cfg.total_classes();
  std::vector<std::uint8_t> train_used(train_labels.size(), 0);
  std::vector<std::uint8_t> test_used(test_labels.size(), 0);
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const SessionSpec& spec = specs[s];
    if (spec.id != s) throw ProtocolError("session ids must run consecutively from zero");
    if (spec.classes != classes_of_session(s, cfg)) {
      throw ProtocolError("session " + std::to_string(s) +
                          " does not own the expected class block");
    }
    std::vector<std::size_t> train_count(total, 0), test_count(total, 0);
    for (const std::size_t i : spec.train_indices) {
      if (i >= train_labels.size()) {
        throw ProtocolError("train index out of range: " + std::to_string(i));
      }
      if (train_used[i]) {
        throw ProtocolError("train sample " + std::to_string(i) + " used by two sessions");
      }
      train_used[i] = 1;
      const int c = train_labels[i];
      if (session_of_class(c, cfg) != s) {
        throw ProtocolError("train sample " + std::to_string(i) + " of class " +
                            std::to_string(c) + " assigned to session " + std::to_string(s));
      }
      ++train_count[static_cast<std::size_t>(c)];
    }
    for (const int c : spec.classes) {
      const std::size_t got = train_count[static_cast<std::size_t>(c)];
      if (s == 0) {
        if (got == 0) {
          throw ProtocolError("base class " + std::to_string(c) + " has no training samples");
        }
      } else if (got != cfg.shots) {
        throw ProtocolError("class " + std::to_string(c) + " has " + std::to_string(got) +
                            " shots, expected " + std::to_string(cfg.shots));
      }
    }
    for (const std::size_t i : spec.test_indices) {
      if (i >= test_labels.size()) {
        throw ProtocolError("test index out of range: " + std::to_string(i));
      }
      if (test_used[i]) {
        throw ProtocolError("test sample " + std::to_string(i) + " used by two sessions");
      }
      test_used[i] = 1;
      const int c = test_labels[i];
      if (session_of_class(c, cfg) != s) {
        throw ProtocolError("test sample " + std::to_string(i) + " of class " +
                            std::to_string(c) + " assigned to session " + std::to_string(s));
      }
      ++test_count[static_cast<std::size_t>(c)];
    }
    for (const int c : spec.classes) {
      if (test_count[static_cast<std::size_t>(c)] == 0) {
        throw ProtocolError("class " + std::to_string(c) + " has no test samples");
      }
    }
  }
  for (std::size_t i = 0; i < test_used.size(); ++i) {
    if (!test_used[i]) {
      throw ProtocolError("test sample " + std::to_string(i) + " not covered by any session");
    }
  }
}

std::uint64_t dataset_fingerprint(const ImageSet& train, const ImageSet& test) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  const auto mix = [&h](const ImageSet& set) {
    const std::uint64_t dims[2] = {set.height, set.width};
    h = fnv1a(dims, sizeof dims, h);
    for (const ImageSample& s : set.samples) {
      const std::int32_t meta[2] = {s.label, s.session};
      h = fnv1a(meta, sizeof meta, h);
      h = fnv1a(s.pixels.data(), s.pixels.size() * sizeof(double), h);
    }
  };
  mix(train);
  mix(test);
  return h;
}

Pipeline::Pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  state_.cfg = cfg;
}

Pipeline::Pipeline(PipelineState state) : state_(std::move(state)) {
  state_.cfg.validate();
}

ImageSet Pipeline::gather(const ImageSet& pool, const std::vector<std::size_t>& indices) const {
  ImageSet out;
  out.height = pool.height;
  out.width = pool.width;
  out.samples.reserve(indices.size());
  for (const std::size_t i : indices) out.samples.push_back(pool.samples.at(i));
  return out;
}

void Pipeline::train_stage1(const ImageSet& train, const std::vector<SessionSpec>& specs) {
  const PipelineConfig& cfg = state_.cfg;
  const Rng master(cfg.seed);
  const ImageSet base_set = gather(train, specs.at(0).train_indices);

  ImageSet work;
  std::size_t label_count = cfg.base_classes;
  if (cfg.vcg && cfg.virtual_fold > 0) {
    Rng vr = master.derive(kTagVirtual);
    VirtualAugmentation aug =
        generate_virtual_classes(base_set, cfg.base_classes, cfg.virtual_fold, vr);
    work = std::move(aug.images);
    label_count = aug.label_count;
    log::info("stage1: training over " + std::to_string(label_count) + " labels (" +
              std::to_string(cfg.base_classes) + " real)");
  } else {
    work = base_set;
  }

  const std::size_t d_in = train.pixel_count();
  std::vector<std::size_t> widths;
  widths.push_back(d_in);
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(cfg.feature_dim);
  Rng ir = master.derive(kTagModelInit);
  state_.backbone = MlpBackbone(widths, ir);
  state_.head = ClassifierHead(cfg.feature_dim, label_count, cfg.head_bias, ir);

  CenterBank centers(label_count, cfg.feature_dim, cfg.center_ema);
  SgdMomentum opt(cfg.lr, cfg.momentum, cfg.weight_decay);
  std::vector<std::size_t> wh, bh;
  for (const LinearLayer& layer : state_.backbone.layers()) {
    wh.push_back(opt.register_param(layer.weight.size()));
    bh.push_back(opt.register_param(layer.bias.size()));
  }
  const std::size_t hwh = opt.register_param(state_.head.weight().size());
  const std::size_t hbh = cfg.head_bias ? opt.register_param(state_.head.bias().size()) : 0;

  const std::size_t n = work.samples.size();
  const std::size_t fd = cfg.feature_dim;
  const std::size_t epochs = cfg.effective_epochs(cfg.s1_epochs);
  const bool use_ct = cfg.ct && cfg.lambda_ct > 0;
  Rng sr = master.derive(kTagStage1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  BackboneGrads grads = state_.backbone.make_grads();
  MlpBackbone::Cache cache;
  state_.stage1_epoch_loss.clear();

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Rng er = sr.derive(epoch);
    er.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.s1_batch) {
      const std::size_t b = std::min(cfg.s1_batch, n - start);
      Mat x(b, d_in);
      std::vector<std::size_t> labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        const ImageSample& s = work.samples[order[start + i]];
        std::copy(s.pixels.begin(), s.pixels.end(), x.row(i));
        labels[i] = static_cast<std::size_t>(s.label);
      }
      const Mat f = state_.backbone.forward_cached(x, cache);
      const Mat logits = state_.head.logits(f);
      centers.update(f, labels);

      Mat dlogits(b, label_count);
      Mat dfeat_ct(b, fd);
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        const LossGrads ce = ce_loss(logits.row_vec(i), labels[i]);
        double sample_loss = ce.value;
        for (std::size_t c = 0; c < label_count; ++c) dlogits(i, c) = ce.dlogits[c] * inv_b;
        if (use_ct && centers.initialized_count() >= 2) {
          const LossGrads ctg = ct_loss(f.row_vec(i), labels[i], centers, cfg.margin);
          sample_loss = total_base_loss(ce.value, ctg.value, cfg.lambda_ct);
          for (std::size_t k = 0; k < fd; ++k) {
            dfeat_ct(i, k) = cfg.lambda_ct * ctg.dfeature[k] * inv_b;
          }
        }
        loss_sum += sample_loss;
      }

      Mat dhw(label_count, fd);
      kernels::linear_grad_weight(dlogits.data(), f.data(), b, fd, label_count, dhw.data());
      Mat dfeat(b, fd);
      kernels::linear_grad_input(dlogits.data(), state_.head.weight().data(), b, fd,
                                 label_count, dfeat.data());
      for (std::size_t i = 0; i < dfeat.size(); ++i) {
        dfeat.values()[i] += dfeat_ct.values()[i];
      }
      grads.reset();
      state_.backbone.backward(cache, dfeat, grads);
      for (std::size_t l = 0; l < wh.size(); ++l) {
        LinearLayer& layer = state_.backbone.layers()[l];
        opt.step(wh[l], layer.weight.data(), grads.dweight[l].data(), layer.weight.size());
        opt.step(bh[l], layer.bias.data(), grads.dbias[l].data(), layer.bias.size());
      }
      opt.step(hwh, state_.head.weight().data(), dhw.data(), dhw.size());
      if (cfg.head_bias) {
        Vec dhb(label_count, 0.0);
        kernels::linear_grad_bias(dlogits.data(), b, label_count, dhb.data());
        opt.step(hbh, state_.head.bias().data(), dhb.data(), dhb.size());
      }
    }
    state_.stage1_epoch_loss.push_back(loss_sum / static_cast<double>(n));
    log::debug("stage1 epoch " + std::to_string(epoch) + " loss " +
               std::to_string(state_.stage1_epoch_loss.back()));
  }
  state_.backbone.freeze();

  const FeatureDataset feats = extract_features(state_.backbone, base_set);
  state_.separation = measure_separation(feats, cfg.base_classes);
}

void Pipeline::calibrate_head(const ImageSet& train, const std::vector<SessionSpec>& specs) {
  const PipelineConfig& cfg = state_.cfg;
  const Rng master(cfg.seed);
  const Rng r2 = master.derive(kTagStage2);
  const Rng bank_rng = r2.derive(1);
  Rng tune_rng = r2.derive(2);

  state_.head = state_.head.truncated(cfg.base_classes);

  const ImageSet base_set = gather(train, specs.at(0).train_indices);
  const FeatureDataset feats = extract_features(state_.backbone, base_set);
  std::vector<std::vector<Vec>> by_class(cfg.base_classes);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    by_class.at(static_cast<std::size_t>(feats.labels[i])).push_back(feats.features[i]);
  }
  state_.banks.clear();
  for (std::size_t c = 0; c < cfg.base_classes; ++c) {
    Rng cr = bank_rng.derive(c);
    state_.banks.push_back(
        build_memory_bank(by_class[c], static_cast<int>(c), 0, cfg.stored_per_class, cr));
  }

  FeatureDataset cal;
  cal.dim = feats.dim;
  for (const ClassMemoryBank& bank : state_.banks) {
    for (const Vec& f : bank.stored) cal.push(f, bank.class_id);
  }
  train_head(state_.head, cal, nullptr, cfg.effective_epochs(cfg.s2_epochs), cfg.s2_batch,
             cfg.s2_lr, cfg, tune_rng);
  state_.capture_heads.assign(1, state_.head);
}

void Pipeline::evaluate(std::size_t upto_session, const ImageSet& test,
                        const std::vector<SessionSpec>& specs) {
  const PipelineConfig& cfg = state_.cfg;
  std::vector<std::size_t> pool;
  for (std::size_t s = 0; s <= upto_session; ++s) {
    pool.insert(pool.end(), specs.at(s).test_indices.begin(), specs.at(s).test_indices.end());
  }
  const ImageSet eval_set = gather(test, pool);
  const FeatureDataset feats = extract_features(state_.backbone, eval_set);
  const std::size_t n_classes = state_.head.classes();

  if (state_.tracks.empty()) {
    if (cfg.track == Track::softmax || cfg.track == Track::both) {
      state_.tracks.push_back({"softmax", {}});
    }
    if (cfg.track == Track::ncm || cfg.track == Track::both) {
      state_.tracks.push_back({"ncm", {}});
    }
  }
  for (TrackResults& track : state_.tracks) {
    std::vector<int> preds;
    preds.reserve(feats.size());
    if (track.name == "softmax") {
      Mat f(feats.size(), feats.dim);
      for (std::size_t i = 0; i < feats.size(); ++i) f.set_row(i, feats.features[i]);
      const Mat logits = state_.head.logits(f);
      for (std::size_t i = 0; i < feats.size(); ++i) {
        preds.push_back(static_cast<int>(argmax(logits.row_vec(i))));
      }
    } else {
      preds = ncm_predict(feats, state_.banks, n_classes, cfg.ncm_similarity,
                          state_.warnings);
    }
    SessionResult r;
    r.session = upto_session;
    r.confusion = ConfusionMatrix::from(preds, feats.labels, n_classes);
    r.accuracy = r.confusion.overall_accuracy();
    r.per_class = r.confusion.per_class_accuracy();
    track.sessions.push_back(std::move(r));
  }
}

void Pipeline::run_base(const ImageSet& train, const ImageSet& test,
                        const std::vector<SessionSpec>& specs) {
  if (state_.completed_session != -1) throw ProtocolError("base stage already completed");
  validate_protocol(specs, labels_of(train), labels_of(test), state_.cfg);
  bind_fingerprint(state_, train, test);
  train_stage1(train, specs);
  calibrate_head(train, specs);
  state_.completed_session = 0;
  evaluate(0, test, specs);
}

void Pipeline::run_representation_only(const ImageSet& train,
                                       const std::vector<SessionSpec>& specs) {
  if (state_.completed_session != -1) throw ProtocolError("base stage already completed");
  train_stage1(train, specs);
}

void Pipeline::run_incremental(std::size_t session, const ImageSet& train,
                               const ImageSet& test, const std::vector<SessionSpec>& specs) {
  const PipelineConfig& cfg = state_.cfg;
  if (session == 0 || session > cfg.incremental_sessions) {
    throw ProtocolError("incremental session id out of range: " + std::to_string(session));
  }
  if (state_.completed_session != static_cast<int>(session) - 1) {
    throw ProtocolError("session " + std::to_string(session) + " requires completed session " +
                        std::to_string(session - 1));
  }
  validate_protocol(specs, labels_of(train), labels_of(test), cfg);
  bind_fingerprint(state_, train, test);

  const SessionSpec& spec = specs.at(session);
  const std::size_t old_classes = cfg.base_classes + (session - 1) * cfg.ways;
  const Rng master(cfg.seed);
  const Rng skr = master.derive(kTagSession + session);

  const ImageSet cur_set = gather(train, spec.train_indices);
  FeatureDataset cur = extract_features(state_.backbone, cur_set);

  // prototype imprinting: each new class enters as its mean few-shot feature
  std::vector<Vec> protos;
  for (const int c : spec.classes) {
    Vec m(cur.dim, 0.0);
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (cur.labels[i] != c) continue;
      for (std::size_t k = 0; k < cur.dim; ++k) m[k] += cur.features[i][k];
      ++cnt;
    }
    if (cnt == 0) throw ProtocolError("class " + std::to_string(c) + " has no shots");
    for (double& v : m) v /= static_cast<double>(cnt);
    protos.push_back(std::move(m));
  }
  state_.head.extend(protos);

  const ClassifierHead& teacher = state_.capture_heads.at(session - 1);

  if (cfg.pfs) {
    const double threshold =
        cfg.threshold_mode == ThresholdMode::fraction
            ? cfg.entropy_threshold * std::log(static_cast<double>(old_classes))
            : cfg.entropy_threshold;
    const Rng syn = skr.derive(1);
    std::size_t fallbacks = 0;
    for (std::size_t c = 0; c < old_classes; ++c) {
      SynthesisConfig sc;
      sc.count = cfg.pseudo_per_class;
      sc.entropy_threshold = threshold;
      sc.max_attempts = cfg.pseudo_per_class * cfg.max_attempt_factor;
      sc.uncertainty_filter = cfg.us;
      Rng cr = syn.derive(c);
      fallbacks += synthesize_pseudo_features(state_.banks.at(c), teacher, sc, cr);
    }
    state_.pseudo_fallbacks += fallbacks;
    if (fallbacks > 0) {
      state_.warnings.push_back("session " + std::to_string(session) + ": " +
                                std::to_string(fallbacks) +
                                " pseudo-feature slots fell back to the class mean");
    }
  }

  FeatureDataset replay;
  if (cfg.pfs) {
    ReplayConfig rc;
    rc.include_stored = cfg.replay_stored;
    replay = assemble_replay_set(state_.banks, old_classes, cur, rc);
  } else {
    replay = cur;
  }

  Rng tr = skr.derive(2);
  const ClassifierHead* kd_teacher = (cfg.pfs && cfg.kd_beta > 0) ? &teacher : nullptr;
  train_head(state_.head, replay, kd_teacher, cfg.effective_epochs(cfg.s3_epochs),
             cfg.s3_batch, cfg.s3_lr, cfg, tr);

  const Rng br = skr.derive(3);
  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    const int c = spec.classes[j];
    std::vector<Vec> class_feats;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (cur.labels[i] == c) class_feats.push_back(cur.features[i]);
    }
    Rng cr = br.derive(j);
    state_.banks.push_back(build_memory_bank(class_feats, c, static_cast<int>(session),
                                             cfg.stored_per_class, cr));
  }
  state_.capture_heads.push_back(state_.head);
  state_.completed_session = static_cast<int>(session);
  evaluate(session, test, specs);
}

void Pipeline::run_all(const ImageSet& train, const ImageSet& test,
                       const std::vector<SessionSpec>& specs) {
  run_base(train, test, specs);
  for (std::size_t s = 1; s <= state_.cfg.incremental_sessions; ++s) {
    run_incremental(s, train, test, specs);
  }
}

}  // namespace fscil
