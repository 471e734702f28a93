// Python bindings for the pcgcls library.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pcgcls/data_io.hpp"
#include "pcgcls/dsp.hpp"
#include "pcgcls/ensemble.hpp"
#include "pcgcls/error.hpp"
#include "pcgcls/features.hpp"
#include "pcgcls/metrics.hpp"
#include "pcgcls/pipeline.hpp"
#include "pcgcls/segmentation.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw pcg::ShapeError("expected a one-dimensional array");
    return std::vector<double>(a.data(), a.data() + a.size());
}

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

Array map_to_array(const pcg::FeatureMap& m) {
    Array out({static_cast<py::ssize_t>(m.frames), static_cast<py::ssize_t>(m.coefficients)});
    std::copy(m.values.begin(), m.values.end(), out.mutable_data());
    return out;
}

pcg::Beat norm_beat(const Array& samples) {
    pcg::Beat b;
    b.samples = to_vector(samples);
    b.length_policy = pcg::LengthPolicy::Norm1000;
    return b;
}

Array preprocess(const Array& samples, int sample_rate_hz) {
    return to_array(pcg::preprocess(pcg::Signal(to_vector(samples), sample_rate_hz)).samples());
}

Array bandpass_response(const Array& freqs, int order, double low_hz, double high_hz, int sample_rate_hz) {
    pcg::FilterSpec spec{order, low_hz, high_hz, sample_rate_hz};
    const auto chain = pcg::design_butterworth_bandpass(spec);
    std::vector<double> mag;
    for (double f : to_vector(freqs)) mag.push_back(std::abs(chain.response(f, sample_rate_hz)));
    return to_array(mag);
}

Array filter_zero_phase(const Array& samples, int order, double low_hz, double high_hz, int sample_rate_hz) {
    pcg::FilterSpec spec{order, low_hz, high_hz, sample_rate_hz};
    return to_array(pcg::filter_zero_phase(to_vector(samples), pcg::design_butterworth_bandpass(spec)));
}

std::vector<Array> segment(const Array& samples, const std::string& annotations, int annotation_rate_hz,
                           const std::string& policy) {
    const pcg::Signal signal(to_vector(samples), pcg::kTargetRateHz);
    auto states = pcg::parse_annotations(annotations);
    if (annotation_rate_hz != pcg::kTargetRateHz) states = states.rescaled(annotation_rate_hz, pcg::kTargetRateHz);
    const auto chosen = pcg::parse_length_policy(policy);
    std::vector<Array> out;
    for (const auto& beat : pcg::segment_beats(signal, states, pcg::Label::Normal)) {
        if (auto b = pcg::apply_length_policy(beat, chosen)) out.push_back(to_array(b->samples));
    }
    return out;
}

Array mfcc(const Array& beat) {
    return map_to_array(pcg::mfcc_map(norm_beat(beat), pcg::FrameConfig{}, pcg::make_mel_filterbank()));
}

Array tvar(const Array& beat) { return map_to_array(pcg::tvar_map(norm_beat(beat), pcg::FrameConfig{})); }

py::tuple levinson(const Array& autocorr, int order) {
    const auto r = pcg::levinson_durbin(to_vector(autocorr), order);
    return py::make_tuple(to_array(r.coefficients), r.residual_energy);
}

py::dict report_dict(const pcg::EvalReport& r) {
    py::dict d;
    d["tp"] = r.tp;
    d["tn"] = r.tn;
    d["fp"] = r.fp;
    d["fn"] = r.fn;
    d["accuracy"] = r.accuracy;
    d["sensitivity"] = r.sensitivity;
    d["specificity"] = r.specificity;
    d["macc"] = r.macc;
    return d;
}

py::tuple fuse(std::pair<double, double> a, std::pair<double, double> b) {
    pcg::ClassScores x, y;
    x.p_normal = a.first;
    x.p_abnormal = a.second;
    y.p_normal = b.first;
    y.p_abnormal = b.second;
    const auto f = pcg::fuse_scores(x, y);
    return py::make_tuple(f.p_normal, f.p_abnormal, std::string(pcg::to_string(f.predicted)));
}

py::list synth(int n_recordings, int beats_per_recording, std::uint64_t seed) {
    pcg::SynthConfig cfg;
    cfg.n_recordings = n_recordings;
    cfg.beats_per_recording = beats_per_recording;
    cfg.seed = seed;
    py::list out;
    for (const auto& r : pcg::synth_pcg(cfg)) {
        py::dict d;
        d["id"] = r.id;
        d["subject_id"] = r.subject_id;
        d["label"] = std::string(pcg::to_string(r.label));
        d["sample_rate_hz"] = r.signal.sample_rate_hz();
        d["samples"] = to_array(r.signal.samples());
        d["annotations"] = pcg::format_annotations(r.states);
        out.append(d);
    }
    return out;
}

pcg::ConfigValues config_values(const py::dict& config) {
    pcg::ConfigValues values;
    for (const auto& [k, v] : config) values[py::str(k)] = py::str(v);
    return values;
}

std::string run(const std::string& command, const py::dict& config) {
    const auto cfg = pcg::make_run_config(config_values(config));
    std::ostringstream out, log;
    if (command == "synth") pcg::cmd_synth(cfg, log);
    else if (command == "train") pcg::cmd_train(cfg, log);
    else if (command == "evaluate") pcg::cmd_evaluate(cfg, out, log);
    else if (command == "predict") pcg::cmd_predict(cfg, out, log);
    else if (command == "features") pcg::cmd_features(cfg, log);
    else if (command == "segment") pcg::cmd_segment(cfg, log);
    else throw pcg::ConfigError("unknown command '" + command + "'");
    return out.str();
}

class Model {
public:
    explicit Model(const std::string& path) : set_(pcg::load_model(path)) {}

    std::string kind() const { return std::string(pcg::to_string(set_.kind)); }

    /// Rows of (p_normal, p_abnormal); ECNN rows are renormalised to sum to one.
    py::array_t<double> predict(const py::object& beats, const py::object& maps) {
        std::vector<pcg::Beat> bs;
        std::vector<pcg::FeatureMap> fs;
        if (!beats.is_none()) {
            const auto a = beats.cast<Array>();
            if (a.ndim() != 2) throw pcg::ShapeError("beats must be a B x L array");
            for (py::ssize_t i = 0; i < a.shape(0); ++i) {
                pcg::Beat b;
                b.samples.assign(a.data(i, 0), a.data(i, 0) + a.shape(1));
                b.length_policy = set_.beat_policy;
                bs.push_back(std::move(b));
            }
        }
        if (!maps.is_none()) {
            const auto a = maps.cast<Array>();
            if (a.ndim() != 3) throw pcg::ShapeError("feature maps must be a B x T x D array");
            for (py::ssize_t i = 0; i < a.shape(0); ++i) {
                pcg::FeatureMap m;
                m.frames = static_cast<std::size_t>(a.shape(1));
                m.coefficients = static_cast<std::size_t>(a.shape(2));
                m.kind = set_.features;
                m.values.assign(a.data(i, 0, 0), a.data(i, 0, 0) + a.shape(1) * a.shape(2));
                fs.push_back(std::move(m));
            }
        }
        if (bs.empty()) {
            // feature-only models still take one placeholder beat per map
            for (std::size_t i = 0; i < fs.size(); ++i) {
                pcg::Beat b;
                b.samples.assign(1000, 0.0);
                b.length_policy = pcg::LengthPolicy::Norm1000;
                bs.push_back(std::move(b));
            }
        }
        const auto scores = pcg::predict_batch(set_, bs, fs);
        py::array_t<double> out({static_cast<py::ssize_t>(scores.size()), py::ssize_t{2}});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const auto s = set_.kind == pcg::ModelKind::Ecnn ? pcg::renormalized(scores[i]) : scores[i];
            w(static_cast<py::ssize_t>(i), 0) = s.p_normal;
            w(static_cast<py::ssize_t>(i), 1) = s.p_abnormal;
        }
        return out;
    }

private:
    pcg::ModelSet set_;
};

}  // namespace

PYBIND11_MODULE(_pcgcls, m) {
    m.doc() = "Heart-sound beat classification";

    static py::exception<pcg::Error> base(m, "PcgError");
    static py::exception<pcg::Error> config_error(m, "ConfigError", base.ptr());
    static py::exception<pcg::Error> data_error(m, "DataError", base.ptr());
    static py::exception<pcg::Error> numeric_error(m, "NumericError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const pcg::Error& e) {
            switch (e.category()) {
                case pcg::ErrorCategory::Config: py::set_error(config_error, e.what()); return;
                case pcg::ErrorCategory::Data: py::set_error(data_error, e.what()); return;
                case pcg::ErrorCategory::Numeric: py::set_error(numeric_error, e.what()); return;
            }
            py::set_error(base, e.what());
        }
    });

    m.def("preprocess", &preprocess, py::arg("samples"), py::arg("sample_rate_hz"),
          "Resample to 1 kHz, band-pass 25-400 Hz (zero phase) and standardise.");
    m.def("bandpass_response", &bandpass_response, py::arg("freqs"), py::arg("order") = 4, py::arg("low_hz") = 25.0,
          py::arg("high_hz") = 400.0, py::arg("sample_rate_hz") = 1000, "Magnitude response of the band-pass design.");
    m.def("filter_zero_phase", &filter_zero_phase, py::arg("samples"), py::arg("order") = 4, py::arg("low_hz") = 25.0,
          py::arg("high_hz") = 400.0, py::arg("sample_rate_hz") = 1000);
    m.def("segment", &segment, py::arg("samples"), py::arg("annotations"), py::arg("annotation_rate_hz") = 1000,
          py::arg("policy") = "norm1000", "Beats of a 1 kHz signal from an annotation CSV.");
    m.def("mfcc", &mfcc, py::arg("beat"), "96 x 12 MFCC map of a 1000-sample beat.");
    m.def("tvar", &tvar, py::arg("beat"), "96 x 12 time-varying AR map of a 1000-sample beat.");
    m.def("levinson", &levinson, py::arg("autocorr"), py::arg("order"), "Returns (a1..ap, residual energy).");
    m.def("evaluate_counts", [](long tp, long tn, long fp, long fn) { return report_dict(pcg::evaluate_counts(tp, tn, fp, fn)); },
          py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));
    m.def("fuse_scores", &fuse, py::arg("a"), py::arg("b"), "Sum of two (p_normal, p_abnormal) pairs and its label.");
    m.def("synth", &synth, py::arg("n_recordings") = 4, py::arg("beats_per_recording") = 8, py::arg("seed") = 1);
    m.def("run", &run, py::arg("command"), py::arg("config"),
          "Runs a CLI command with a key -> value config; returns what it would print.");

    py::class_<Model>(m, "Model")
        .def(py::init<const std::string&>(), py::arg("path"))
        .def_property_readonly("kind", &Model::kind)
        .def("predict", &Model::predict, py::arg("beats") = py::none(), py::arg("maps") = py::none());
}
