#include "dvector/archive.hpp"
#include "dvector/embedding.hpp"
#include "dvector/errors.hpp"
#include "dvector/evaluation.hpp"
#include "dvector/frontend.hpp"
#include "dvector/network.hpp"
#include "dvector/scoring.hpp"
#include "dvector/synthdata.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dvector;

namespace {

FeatureSequence as_sequence(const Matrix& frames) {
  FeatureSequence f;
  f.frames = frames;
  return f;
}

std::vector<eval::ScoreRecord> as_records(const std::vector<double>& scores, const std::vector<bool>& targets) {
  if (scores.size() != targets.size()) throw InputError("scores and targets differ in length");
  std::vector<eval::ScoreRecord> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({{"m", std::to_string(i), static_cast<bool>(targets[i])}, scores[i]});
  }
  return out;
}

nnet::Dataset as_dataset(const Matrix& inputs, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw ShapeError("inputs need one row per label");
  }
  return {inputs.transpose(), labels};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "d-vector text-dependent speaker verification core";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  auto data_error = py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());
  (void)config_error;
  (void)data_error;

  // Front end.
  py::class_<frontend::FrontendConfig>(m, "FrontendConfig")
      .def(py::init<>())
      .def_readwrite("n_mel", &frontend::FrontendConfig::n_mel)
      .def_readwrite("frame_len", &frontend::FrontendConfig::frame_len)
      .def_readwrite("frame_shift", &frontend::FrontendConfig::frame_shift)
      .def_readwrite("preemph", &frontend::FrontendConfig::preemph)
      .def_readwrite("fft_size", &frontend::FrontendConfig::fft_size)
      .def_readwrite("mel_low", &frontend::FrontendConfig::mel_low)
      .def_readwrite("mel_high", &frontend::FrontendConfig::mel_high)
      .def_readwrite("mean_normalize", &frontend::FrontendConfig::mean_normalize);

  m.def(
      "fbank",
      [](std::vector<double> samples, int sample_rate, const frontend::FrontendConfig& cfg) {
        return frontend::fbank(frontend::AudioSignal{std::move(samples), sample_rate}, cfg).frames;
      },
      py::arg("samples"), py::arg("sample_rate") = 16000, py::arg("config") = frontend::FrontendConfig{},
      "Log mel filterbank, T x n_mel.");
  m.def(
      "read_wav",
      [](const std::filesystem::path& p) {
        auto s = frontend::read_wav(p);
        return py::make_tuple(s.samples, s.sample_rate);
      },
      py::arg("path"), "Returns (samples, sample_rate).");
  m.def(
      "stack_context",
      [](const Matrix& frames, int left, int right) { return frontend::stack_context(as_sequence(frames), left, right).frames; },
      py::arg("frames"), py::arg("left"), py::arg("right"));

  // Pooling.
  m.def(
      "average_pool",
      [](const Matrix& frames, bool unit_norm) { return embedding::average_pool(as_sequence(frames), unit_norm).values; },
      py::arg("frames"), py::arg("unit_norm") = false);
  m.def(
      "segment_pool",
      [](const Matrix& frames, int n, bool unit_norm) {
        return embedding::segment_pool(as_sequence(frames), n, unit_norm).as_matrix();
      },
      py::arg("frames"), py::arg("n"), py::arg("unit_norm") = false, "n x H piece-wise d-vectors.");

  // Scoring.
  m.def("cosine", &scoring::cosine, py::arg("a"), py::arg("b"));
  m.def(
      "segment_score",
      [](const Matrix& a, const Matrix& b) {
        return scoring::segment_score(embedding::DVectorSequence::from_matrix(a, "a"),
                                      embedding::DVectorSequence::from_matrix(b, "b"));
      },
      py::arg("enroll"), py::arg("test"));
  m.def(
      "dtw_score", [](const Matrix& a, const Matrix& b, int band) { return scoring::dtw_score(a, b, {band}); },
      py::arg("enroll"), py::arg("test"), py::arg("band") = 0);
  m.def(
      "dtw_align",
      [](const Matrix& a, const Matrix& b, int band) {
        const auto al = scoring::dtw_align(a, b, {band});
        return py::make_tuple(al.total_cost, al.path_cells);
      },
      py::arg("enroll"), py::arg("test"), py::arg("band") = 0, "Returns (total_cost, path_cells).");
  m.def(
      "fuse", [](double a, double b, double alpha) { return scoring::fuse(a, b, {alpha}); }, py::arg("score_a"),
      py::arg("score_b"), py::arg("alpha"));

  // Evaluation.
  m.def(
      "compute_eer",
      [](const std::vector<double>& scores, const std::vector<bool>& targets) {
        const auto r = eval::compute_eer(as_records(scores, targets));
        return py::make_tuple(r.eer, r.threshold);
      },
      py::arg("scores"), py::arg("targets"), "Returns (eer, threshold).");
  m.def(
      "sweep_alpha",
      [](const std::vector<double>& a, const std::vector<double>& b, const std::vector<bool>& targets, double step) {
        const auto r = eval::sweep_alpha(as_records(a, targets), as_records(b, targets), step);
        std::vector<std::pair<double, double>> table;
        for (const auto& row : r.table) table.emplace_back(row.alpha, row.eer);
        py::dict d;
        d["best_alpha"] = r.best_alpha;
        d["best_eer"] = r.best_eer;
        d["table"] = table;
        return d;
      },
      py::arg("scores_a"), py::arg("scores_b"), py::arg("targets"), py::arg("grid_step") = 0.05);

  // Synthetic corpus.
  py::class_<synth::SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_speakers", &synth::SynthConfig::n_speakers)
      .def_readwrite("n_phrases", &synth::SynthConfig::n_phrases)
      .def_readwrite("phones_per_phrase", &synth::SynthConfig::phones_per_phrase)
      .def_readwrite("utterances_per_speaker_phrase", &synth::SynthConfig::utterances_per_speaker_phrase)
      .def_readwrite("feature_dim", &synth::SynthConfig::feature_dim)
      .def_readwrite("phone_set_size", &synth::SynthConfig::phone_set_size)
      .def_readwrite("frames_per_phone", &synth::SynthConfig::frames_per_phone)
      .def_readwrite("frames_jitter", &synth::SynthConfig::frames_jitter)
      .def_readwrite("speaker_scale", &synth::SynthConfig::speaker_scale)
      .def_readwrite("phone_scale", &synth::SynthConfig::phone_scale)
      .def_readwrite("session_scale", &synth::SynthConfig::session_scale)
      .def_readwrite("noise_scale", &synth::SynthConfig::noise_scale)
      .def_readwrite("seed", &synth::SynthConfig::seed);
  m.def(
      "generate",
      [](const synth::SynthConfig& cfg) {
        const auto c = synth::generate(cfg);
        py::list out;
        for (const auto& u : c.utterances) {
          py::dict d;
          d["utt_id"] = u.utt_id;
          d["speaker"] = u.speaker;
          d["phrase"] = u.phrase;
          d["session"] = u.session;
          d["feats"] = u.feats.frames;
          d["phone_labels"] = u.phone_labels;
          out.append(d);
        }
        return out;
      },
      py::arg("config") = synth::SynthConfig{}, "List of utterance dicts.");
  m.def("oracle_posteriors",
        py::overload_cast<const std::vector<int>&, int, double>(&synth::oracle_posteriors), py::arg("phone_labels"),
        py::arg("phone_set_size"), py::arg("smoothing") = 0.1);

  // Network.
  py::class_<nnet::NetworkSpec>(m, "NetworkSpec")
      .def(py::init<>())
      .def_readwrite("input_dim", &nnet::NetworkSpec::input_dim)
      .def_readwrite("hidden_dims", &nnet::NetworkSpec::hidden_dims)
      .def_readwrite("output_dim", &nnet::NetworkSpec::output_dim)
      .def_readwrite("posterior_dim", &nnet::NetworkSpec::posterior_dim)
      .def_readwrite("seed", &nnet::NetworkSpec::seed);
  py::class_<nnet::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("init_lr", &nnet::TrainConfig::init_lr)
      .def_readwrite("lr_halving_threshold", &nnet::TrainConfig::lr_halving_threshold)
      .def_readwrite("stop_lr", &nnet::TrainConfig::stop_lr)
      .def_readwrite("stop_improvement", &nnet::TrainConfig::stop_improvement)
      .def_readwrite("max_epochs", &nnet::TrainConfig::max_epochs)
      .def_readwrite("minibatch", &nnet::TrainConfig::minibatch)
      .def_readwrite("momentum", &nnet::TrainConfig::momentum)
      .def_readwrite("lr_per_frame", &nnet::TrainConfig::lr_per_frame)
      .def_readwrite("shuffle_seed", &nnet::TrainConfig::shuffle_seed);
  py::class_<nnet::Network>(m, "Network")
      .def(py::init(&nnet::init_network), py::arg("spec"))
      .def_readonly("spec", &nnet::Network::spec)
      .def_property_readonly("num_parameters", &nnet::Network::num_parameters)
      .def(
          "forward", [](const nnet::Network& n, const Matrix& inputs) {
            return Matrix(nnet::forward_batch(n, inputs.transpose()).back().transpose());
          },
          py::arg("inputs"), "Softmax outputs, one row per input row.")
      .def(
          "loss", [](const nnet::Network& n, const Matrix& inputs, const std::vector<int>& labels) {
            return nnet::loss_and_gradient(n, Eigen::MatrixXd(inputs.transpose()), labels).loss;
          },
          py::arg("inputs"), py::arg("labels"))
      .def(
          "extract", [](const nnet::Network& n, const Matrix& inputs) { return nnet::extract_frame_features(n, inputs); },
          py::arg("inputs"), "Last hidden layer, one row per input row.")
      .def(
          "save", [](const nnet::Network& n, const std::filesystem::path& p) { nnet::save_model(p, n); },
          py::arg("path"))
      .def_static("load", py::overload_cast<const std::filesystem::path&>(&nnet::load_model), py::arg("path"));
  m.def(
      "train",
      [](nnet::Network net, const Matrix& train_inputs, const std::vector<int>& train_labels, const Matrix& cv_inputs,
         const std::vector<int>& cv_labels, const nnet::TrainConfig& cfg) {
        auto res = nnet::train(std::move(net), as_dataset(train_inputs, train_labels), as_dataset(cv_inputs, cv_labels),
                               cfg);
        py::list log;
        for (const auto& e : res.log) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["lr"] = e.lr;
          d["train_loss"] = e.train_loss;
          d["cv_loss"] = e.cv_loss;
          d["cv_accuracy"] = e.cv_accuracy;
          log.append(d);
        }
        return py::make_tuple(std::move(res.net), log);
      },
      py::arg("net"), py::arg("train_inputs"), py::arg("train_labels"), py::arg("cv_inputs"), py::arg("cv_labels"),
      py::arg("config") = nnet::TrainConfig{}, "Returns (best network, epoch log).");

  // Archives.
  m.def(
      "read_archive",
      [](const std::filesystem::path& p) {
        std::vector<std::pair<std::string, Matrix>> out;
        for (auto& r : io::read_archive(p)) out.emplace_back(std::move(r.id), std::move(r.data));
        return out;
      },
      py::arg("path"), "List of (id, matrix) pairs in file order.");
  m.def(
      "write_archive",
      [](const std::filesystem::path& p, const std::vector<std::pair<std::string, Matrix>>& records) {
        std::vector<io::ArchiveRecord> recs;
        for (const auto& [id, data] : records) recs.push_back({id, data});
        io::write_archive(p, recs);
      },
      py::arg("path"), py::arg("records"));
}
