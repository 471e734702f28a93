#include "pcgcls/data_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "pcgcls/binary_io.hpp"
#include "pcgcls/error.hpp"
#include "pcgcls/random.hpp"

namespace pcg {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

// Non-empty lines with their 1-based line numbers; a UTF-8 BOM is dropped.
std::vector<std::pair<int, std::string_view>> text_lines(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::vector<std::pair<int, std::string_view>> lines;
    int number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++number;
        const auto line = trim(text.substr(start, end - start));
        if (!line.empty()) lines.emplace_back(number, line);
        start = end + 1;
    }
    return lines;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool parse_int64(std::string_view s, std::int64_t& out) {
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

std::string_view to_string(Label label) {
    return label == Label::Normal ? "normal" : "abnormal";
}

Label parse_label(std::string_view token) {
    const auto t = lower(trim(token));
    if (t == "normal" || t == "-1" || t == "0") return Label::Normal;
    if (t == "abnormal" || t == "1") return Label::Abnormal;
    throw ParseError("unknown label token '" + std::string(token) + "'");
}

Signal::Signal(std::vector<double> samples, int sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
    if (samples_.empty()) throw ValidationError("signal has no samples");
    if (sample_rate_hz_ <= 0) {
        throw ValidationError("sample rate must be positive, got " + std::to_string(sample_rate_hz_));
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (!std::isfinite(samples_[i])) {
            throw ValidationError("non-finite sample at index " + std::to_string(i));
        }
    }
}

std::string_view to_string(HeartState state) {
    switch (state) {
        case HeartState::S1: return "S1";
        case HeartState::Systole: return "systole";
        case HeartState::S2: return "S2";
        case HeartState::Diastole: return "diastole";
    }
    return "?";
}

HeartState parse_heart_state(std::string_view token) {
    const auto t = lower(trim(token));
    if (t == "s1") return HeartState::S1;
    if (t == "systole") return HeartState::Systole;
    if (t == "s2") return HeartState::S2;
    if (t == "diastole") return HeartState::Diastole;
    throw ParseError("unknown heart state '" + std::string(token) + "'");
}

StateSequence::StateSequence(std::vector<StateEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].start_sample < 0) {
            throw ValidationError("negative start sample at entry " + std::to_string(i));
        }
        if (i == 0) continue;
        if (entries_[i].start_sample <= entries_[i - 1].start_sample) {
            throw ValidationError("start samples not strictly increasing at entry " +
                                  std::to_string(i));
        }
        if (entries_[i].state != next_state(entries_[i - 1].state)) {
            throw ValidationError("state order violated at entry " + std::to_string(i) + ": " +
                                  std::string(to_string(entries_[i - 1].state)) + " followed by " +
                                  std::string(to_string(entries_[i].state)));
        }
    }
}

StateSequence StateSequence::rescaled(int from_rate, int to_rate) const {
    if (from_rate <= 0 || to_rate <= 0) throw ValidationError("rates must be positive");
    std::vector<StateEntry> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
        const auto s = static_cast<std::int64_t>(
            std::llround(static_cast<double>(e.start_sample) * to_rate / from_rate));
        out.push_back({s, e.state});
    }
    return StateSequence(std::move(out));
}

// --- WAV ---------------------------------------------------------------------

Signal decode_wav(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    try {
        if (r.raw(4) != "RIFF") throw FormatError("missing RIFF tag");
        r.u32();  // riff size; trust chunk walking instead
        if (r.raw(4) != "WAVE") throw FormatError("missing WAVE tag");

        bool have_fmt = false;
        std::uint16_t channels = 0, bits = 0;
        std::uint32_t rate = 0;
        while (!r.at_end()) {
            const auto id = r.raw(4);
            const std::uint32_t size = r.u32();
            if (id == "fmt ") {
                if (size < 16) throw FormatError("fmt chunk too small");
                const std::uint16_t format = r.u16();
                channels = r.u16();
                rate = r.u32();
                r.u32();  // byte rate
                r.u16();  // block align
                bits = r.u16();
                r.raw(size - 16);
                if (size % 2) r.raw(1);
                if (format != 1) {
                    throw UnsupportedFormatError("WAV format code " + std::to_string(format) +
                                                 " is not PCM");
                }
                if (channels != 1) {
                    throw UnsupportedFormatError("WAV has " + std::to_string(channels) +
                                                 " channels; only mono is supported");
                }
                if (bits != 16) {
                    throw UnsupportedFormatError("WAV is " + std::to_string(bits) +
                                                 "-bit; only 16-bit PCM is supported");
                }
                have_fmt = true;
            } else if (id == "data") {
                if (!have_fmt) throw FormatError("data chunk before fmt chunk");
                if (size % 2) throw FormatError("odd data chunk size for 16-bit PCM");
                const std::size_t n = size / 2;
                if (n == 0) throw FormatError("WAV data chunk is empty");
                std::vector<double> samples(n);
                for (std::size_t i = 0; i < n; ++i) {
                    samples[i] = static_cast<std::int16_t>(r.u16()) / 32768.0;
                }
                if (rate == 0 || rate > static_cast<std::uint32_t>(INT32_MAX)) {
                    throw FormatError("invalid sample rate " + std::to_string(rate));
                }
                return Signal(std::move(samples), static_cast<int>(rate));
            } else {
                r.raw(size + (size % 2));
            }
        }
    } catch (const IntegrityError& e) {
        throw FormatError(std::string("truncated WAV: ") + e.what());
    }
    throw FormatError("WAV has no data chunk");
}

Signal load_wav(const std::string& path) {
    try {
        return decode_wav(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    } catch (const UnsupportedFormatError& e) {
        throw UnsupportedFormatError(path + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_wav(const Signal& signal) {
    const auto n = static_cast<std::uint32_t>(signal.size());
    ByteWriter w;
    w.raw("RIFF");
    w.u32(36 + 2 * n);
    w.raw("WAVE");
    w.raw("fmt ");
    w.u32(16);
    w.u16(1);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(signal.sample_rate_hz()));
    w.u32(static_cast<std::uint32_t>(signal.sample_rate_hz()) * 2);
    w.u16(2);
    w.u16(16);
    w.raw("data");
    w.u32(2 * n);
    for (double x : signal.samples()) {
        const double q = std::clamp(std::nearbyint(x * 32768.0), -32768.0, 32767.0);
        w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return std::move(w.bytes());
}

void save_wav(const std::string& path, const Signal& signal) {
    write_file_atomic(path, encode_wav(signal));
}

// --- annotations ------------------------------------------------------------

StateSequence parse_annotations(std::string_view csv_text) {
    std::vector<StateEntry> entries;
    bool first = true;
    for (const auto& [number, line] : text_lines(csv_text)) {
        const auto fields = split_fields(line, ',');
        if (first) {
            first = false;
            if (fields.size() == 2 && lower(fields[0]) == "start_sample" && lower(fields[1]) == "state") {
                continue;
            }
            throw ParseError("annotation header must be 'start_sample,state'");
        }
        if (fields.size() != 2) {
            throw ParseError("line " + std::to_string(number) + ": expected 2 fields");
        }
        std::int64_t start = 0;
        if (!parse_int64(fields[0], start)) {
            throw ParseError("line " + std::to_string(number) + ": bad sample index '" +
                             std::string(fields[0]) + "'");
        }
        entries.push_back({start, parse_heart_state(fields[1])});
    }
    return StateSequence(std::move(entries));
}

StateSequence load_annotations(const std::string& path) {
    return parse_annotations(read_text(path));
}

std::string format_annotations(const StateSequence& states) {
    std::string out = "start_sample,state\n";
    for (const auto& e : states.entries()) {
        out += std::to_string(e.start_sample);
        out += ',';
        out += to_string(e.state);
        out += '\n';
    }
    return out;
}

void save_annotations(const std::string& path, const StateSequence& states) {
    write_text_atomic(path, format_annotations(states));
}

// --- manifest ---------------------------------------------------------------

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view token) {
    const auto t = lower(trim(token));
    if (t == "train") return Split::Train;
    if (t == "test") return Split::Test;
    throw ParseError("unknown split token '" + std::string(token) + "'");
}

std::vector<LabelRow> parse_label_index(std::string_view csv_text) {
    std::vector<LabelRow> rows;
    bool first = true;
    for (const auto& [number, line] : text_lines(csv_text)) {
        const auto fields = split_fields(line, ',');
        if (first) {
            first = false;
            if (fields.size() >= 2 && lower(fields[0]) == "id" && lower(fields[1]) == "label") continue;
            throw ParseError("label index header must be 'id,label,subject_id'");
        }
        if (fields.size() < 2 || fields.size() > 3 || fields[0].empty()) {
            throw ParseError("label index line " + std::to_string(number) + ": expected id,label[,subject_id]");
        }
        LabelRow row{std::string(fields[0]), parse_label(fields[1]), {}};
        row.subject_id = fields.size() == 3 && !fields[2].empty() ? std::string(fields[2]) : row.id;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_label_index(std::span<const LabelRow> rows) {
    std::string out = "id,label,subject_id\n";
    for (const auto& r : rows) {
        out += r.id + "," + std::string(to_string(r.label)) + "," + r.subject_id + "\n";
    }
    return out;
}

DatasetManifest::DatasetManifest(std::vector<RecordingEntry> entries,
                                 std::map<std::string, Split> split)
    : entries_(std::move(entries)), split_(std::move(split)) {
    std::set<std::string> ids;
    std::map<std::string, Split> subject_split;
    for (const auto& e : entries_) {
        if (!ids.insert(e.id).second) throw ValidationError("duplicate recording id " + e.id);
        const auto it = split_.find(e.id);
        if (it == split_.end()) throw ValidationError("recording " + e.id + " has no split");
        const auto [sit, inserted] = subject_split.emplace(e.subject_id, it->second);
        if (!inserted && sit->second != it->second) {
            throw ValidationError("subject " + e.subject_id + " appears in both splits");
        }
    }
    if (split_.size() != ids.size()) {
        throw ValidationError("split assignment names ids absent from the entry list");
    }
}

Split DatasetManifest::split_of(const std::string& id) const {
    const auto it = split_.find(id);
    if (it == split_.end()) throw ValidationError("unknown recording id " + id);
    return it->second;
}

std::vector<RecordingEntry> DatasetManifest::entries_in(Split split) const {
    std::vector<RecordingEntry> out;
    for (const auto& e : entries_) {
        if (split_.at(e.id) == split) out.push_back(e);
    }
    return out;
}

std::map<std::string, Split> assign_splits(std::span<const SplitItem> items,
                                           std::uint64_t split_seed, double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must lie in (0, 1)");
    }
    // Subjects in first-appearance order, then shuffled.
    std::vector<std::string> subjects;
    std::map<std::string, std::array<long, 2>> counts;
    long class_total[2] = {0, 0};
    for (const auto& item : items) {
        auto [it, inserted] = counts.try_emplace(item.subject_id, std::array<long, 2>{0, 0});
        if (inserted) subjects.push_back(item.subject_id);
        ++it->second[static_cast<int>(item.label)];
        ++class_total[static_cast<int>(item.label)];
    }
    std::sort(subjects.begin(), subjects.end());
    Rng rng(derive_seed(split_seed, "split"));
    shuffle(subjects, rng);

    const double target[2] = {std::round(test_fraction * class_total[0]),
                              std::round(test_fraction * class_total[1])};
    long in_test[2] = {0, 0};
    std::map<std::string, Split> subject_split;
    for (const auto& s : subjects) {
        const auto& c = counts.at(s);
        double before = 0.0, after = 0.0;
        for (int k = 0; k < 2; ++k) {
            before += std::abs(in_test[k] - target[k]);
            after += std::abs(in_test[k] + c[k] - target[k]);
        }
        if (after < before) {
            subject_split[s] = Split::Test;
            in_test[0] += c[0];
            in_test[1] += c[1];
        } else {
            subject_split[s] = Split::Train;
        }
    }
    std::map<std::string, Split> out;
    for (const auto& item : items) out[item.id] = subject_split.at(item.subject_id);
    return out;
}

DatasetManifest build_manifest(const std::string& root_dir, std::uint64_t split_seed,
                               double test_fraction) {
    const fs::path root(root_dir);
    if (!fs::is_directory(root)) throw ValidationError("dataset root is not a directory: " + root_dir);
    const auto label_path = root / "labels.csv";
    if (!fs::exists(label_path)) throw ValidationError("dataset root lacks labels.csv: " + root_dir);
    const auto rows = parse_label_index(read_text(label_path.string()));

    std::set<std::string> labelled;
    for (const auto& r : rows) {
        if (!labelled.insert(r.id).second) throw ValidationError("duplicate id in labels.csv: " + r.id);
    }

    std::vector<std::string> unlabelled;
    for (const auto& de : fs::directory_iterator(root)) {
        if (de.path().extension() == ".wav" && !labelled.count(de.path().stem().string())) {
            unlabelled.push_back(de.path().stem().string());
        }
    }
    if (!unlabelled.empty()) {
        std::sort(unlabelled.begin(), unlabelled.end());
        std::string msg = "recordings without label:";
        for (const auto& id : unlabelled) msg += " " + id;
        throw ValidationError(msg);
    }

    std::vector<RecordingEntry> entries;
    std::vector<SplitItem> items;
    std::vector<std::string> missing;
    for (const auto& r : rows) {
        RecordingEntry e{r.id, (root / (r.id + ".wav")).string(),
                         (root / (r.id + ".states.csv")).string(), r.label, r.subject_id};
        if (!fs::exists(e.wav_path) || !fs::exists(e.annotation_path)) missing.push_back(r.id);
        items.push_back({r.id, r.subject_id, r.label});
        entries.push_back(std::move(e));
    }
    if (!missing.empty()) {
        std::string msg = "labelled recordings missing wav or annotation file:";
        for (const auto& id : missing) msg += " " + id;
        throw ValidationError(msg);
    }

    std::map<std::string, Split> split;
    const auto split_file = root / "split.csv";
    if (fs::exists(split_file)) {
        const std::string split_text = read_text(split_file.string());
        bool first = true;
        for (const auto& [number, line] : text_lines(split_text)) {
            const auto f = split_fields(line, ',');
            if (first) {
                first = false;
                if (f.size() == 2 && lower(f[0]) == "id" && lower(f[1]) == "split") continue;
                throw ParseError("split.csv header must be 'id,split'");
            }
            if (f.size() != 2) throw ParseError("split.csv line " + std::to_string(number) + ": expected id,split");
            if (labelled.count(std::string(f[0]))) split[std::string(f[0])] = parse_split(f[1]);
        }
    } else {
        split = assign_splits(items, split_seed, test_fraction);
    }
    return DatasetManifest(std::move(entries), std::move(split));
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::string out = "id\tsplit\tlabel\tsubject\twav\tannotation\n";
    for (const auto& e : manifest.entries()) {
        out += e.id + "\t" + std::string(to_string(manifest.split_of(e.id))) + "\t" +
               std::string(to_string(e.label)) + "\t" + e.subject_id + "\t" + e.wav_path + "\t" +
               e.annotation_path + "\n";
    }
    return out;
}

DatasetManifest parse_manifest(std::string_view text) {
    std::vector<RecordingEntry> entries;
    std::map<std::string, Split> split;
    bool first = true;
    for (const auto& [number, line] : text_lines(text)) {
        const auto f = split_fields(line, '\t');
        if (first) {
            first = false;
            if (!f.empty() && f[0] == "id") continue;
        }
        if (f.size() != 6) throw ParseError("manifest line " + std::to_string(number) + ": expected 6 fields");
        RecordingEntry e{std::string(f[0]), std::string(f[4]), std::string(f[5]), parse_label(f[2]),
                         std::string(f[3])};
        split[e.id] = parse_split(f[1]);
        entries.push_back(std::move(e));
    }
    return DatasetManifest(std::move(entries), std::move(split));
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
    write_text_atomic(path, format_manifest(manifest));
}

DatasetManifest load_manifest(const std::string& path) { return parse_manifest(read_text(path)); }

std::uint32_t manifest_hash(const DatasetManifest& manifest) {
    const auto text = format_manifest(manifest);
    return crc32(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// --- synthesis --------------------------------------------------------------

void SynthConfig::validate() const {
    if (n_recordings <= 0) throw ConfigError("n_recordings must be positive");
    if (beats_per_recording <= 0) throw ConfigError("beats_per_recording must be positive");
    if (!(heart_rate_bpm_lo > 0.0) || heart_rate_bpm_lo > heart_rate_bpm_hi) {
        throw ConfigError("heart rate range must satisfy 0 < lo <= hi");
    }
    if (heart_rate_bpm_hi > 200.0) throw ConfigError("heart rate above 200 bpm is not supported");
    if (!(murmur_amplitude >= 0.0)) throw ConfigError("murmur_amplitude must be >= 0");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
    if (sample_rate_hz < 1000) throw ConfigError("synthetic sample rate must be >= 1000 Hz");
    if (recordings_per_subject <= 0) throw ConfigError("recordings_per_subject must be positive");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct CycleLayout {
    double s1, systole, s2, diastole;  // seconds
};

CycleLayout layout_for(double period_s) {
    CycleLayout c{};
    c.s1 = 0.10;
    c.systole = std::max(0.05, 0.33 * period_s - 0.10);
    c.s2 = 0.08;
    c.diastole = period_s - c.s1 - c.systole - c.s2;
    return c;
}

void add_burst(std::vector<double>& x, int fs, double onset_s, double length_s, double freq_hz,
               double amplitude, double phase) {
    const double center = onset_s + 0.5 * length_s;
    const double sigma = length_s / 6.0;
    const auto lo = static_cast<long>(std::floor(onset_s * fs));
    const auto hi = static_cast<long>(std::ceil((onset_s + length_s) * fs));
    for (long n = std::max(0L, lo); n < std::min<long>(hi, static_cast<long>(x.size())); ++n) {
        const double t = static_cast<double>(n) / fs;
        const double g = std::exp(-0.5 * std::pow((t - center) / sigma, 2));
        x[n] += amplitude * g * std::sin(kTwoPi * freq_hz * (t - onset_s) + phase);
    }
}

void add_murmur(std::vector<double>& x, int fs, double onset_s, double length_s, double amplitude,
                Rng& rng) {
    constexpr int kComponents = 24;
    double freqs[kComponents], phases[kComponents];
    for (int k = 0; k < kComponents; ++k) {
        freqs[k] = uniform(rng, kSynthMurmurLoHz, kSynthMurmurHiHz);
        phases[k] = uniform(rng, 0.0, kTwoPi);
    }
    // Unit-RMS sum of random sines under a Hann envelope.
    const double scale = amplitude * std::sqrt(2.0 / kComponents);
    const auto lo = static_cast<long>(std::floor(onset_s * fs));
    const auto len = static_cast<long>(std::floor(length_s * fs));
    for (long i = 0; i < len; ++i) {
        const long n = lo + i;
        if (n < 0 || n >= static_cast<long>(x.size())) continue;
        const double t = static_cast<double>(n) / fs;
        const double env = 0.5 - 0.5 * std::cos(kTwoPi * (i + 0.5) / len);
        double s = 0.0;
        for (int k = 0; k < kComponents; ++k) s += std::sin(kTwoPi * freqs[k] * t + phases[k]);
        x[n] += scale * env * s;
    }
}

SynthRecording synth_one(const SynthConfig& cfg, int index) {
    Rng rng(derive_seed(derive_seed(cfg.seed, "synth"), static_cast<std::uint64_t>(index)));
    const int fs = cfg.sample_rate_hz;
    const Label label = index % 2 == 0 ? Label::Normal : Label::Abnormal;
    const double hr = uniform(rng, cfg.heart_rate_bpm_lo, cfg.heart_rate_bpm_hi);
    const double base_period = 60.0 / hr;

    std::vector<double> periods(cfg.beats_per_recording);
    for (auto& p : periods) p = base_period * uniform(rng, 0.97, 1.03);

    // Partial leading diastole, complete cycles, trailing S1 + systole.
    const CycleLayout first = layout_for(periods.front());
    const double lead = uniform(rng, 0.3, 0.9) * first.diastole;
    const CycleLayout last = layout_for(periods.back());
    double total = lead + last.s1 + last.systole;
    for (double p : periods) total += p;
    const auto n_samples = static_cast<std::size_t>(std::ceil(total * fs)) + 1;

    std::vector<double> x(n_samples, 0.0);
    std::vector<StateEntry> states;
    std::vector<std::int64_t> boundaries;
    auto at = [fs](double t) { return static_cast<std::int64_t>(std::llround(t * fs)); };

    states.push_back({0, HeartState::Diastole});
    double t = lead;
    const int n_cycles = cfg.beats_per_recording + 1;  // last one partial
    for (int b = 0; b < n_cycles; ++b) {
        const bool partial = b == cfg.beats_per_recording;
        const double period = partial ? periods.back() : periods[b];
        const CycleLayout c = layout_for(period);
        boundaries.push_back(at(t));
        states.push_back({at(t), HeartState::S1});
        states.push_back({at(t + c.s1), HeartState::Systole});
        add_burst(x, fs, t, c.s1, kSynthS1CenterHz, uniform(rng, 0.9, 1.1), uniform(rng, 0.0, kTwoPi));
        if (label == Label::Abnormal && cfg.murmur_amplitude > 0.0) {
            add_murmur(x, fs, t + c.s1, c.systole, cfg.murmur_amplitude, rng);
        }
        if (partial) break;
        const double s2_on = t + c.s1 + c.systole;
        states.push_back({at(s2_on), HeartState::S2});
        states.push_back({at(s2_on + c.s2), HeartState::Diastole});
        add_burst(x, fs, s2_on, c.s2, kSynthS2CenterHz, uniform(rng, 0.7, 0.9), uniform(rng, 0.0, kTwoPi));
        t += period;
    }
    if (cfg.noise_std > 0.0) {
        for (auto& v : x) v += cfg.noise_std * standard_normal(rng);
    }
    // Keep the waveform inside the 16-bit range so WAV export does not clip.
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        const double gain = 0.5 / peak;
        for (auto& v : x) v *= gain;
    }

    char id[32], subject[32];
    std::snprintf(id, sizeof id, "rec%04d", index);
    // Subjects group recordings of one class: the k-th recording of a class
    // belongs to that class's subject k / recordings_per_subject.
    std::snprintf(subject, sizeof subject, "subj%04d",
                  (index / 2 / cfg.recordings_per_subject) * 2 + index % 2);
    SynthRecording rec{
        id,
        subject,
        label,
        Signal(std::move(x), fs),
        StateSequence(std::move(states)),
        std::move(boundaries)};
    return rec;
}

}  // namespace

std::vector<SynthRecording> synth_pcg(const SynthConfig& config) {
    config.validate();
    std::vector<SynthRecording> out;
    out.reserve(static_cast<std::size_t>(config.n_recordings));
    for (int i = 0; i < config.n_recordings; ++i) out.push_back(synth_one(config, i));
    return out;
}

}  // namespace pcg
