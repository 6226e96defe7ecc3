#include "bvcl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bvcl/error.hpp"
#include "bvcl/random.hpp"

namespace bvcl {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    char* end = nullptr;
    out = std::strtod(tok.c_str(), &end);
    return end == tok.c_str() + tok.size() && std::isfinite(out);
}

bool parse_label(const std::string& tok, long& out) {
    if (tok.empty()) return false;
    char* end = nullptr;
    out = std::strtol(tok.c_str(), &end, 10);
    return end == tok.c_str() + tok.size();
}

std::string stem_of(const std::string& path) {
    auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace

TaskDataset load_dataset(const std::string& path, const std::string& name,
                         const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
    const auto header = split_line(line);

    std::size_t label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) {
            if (label_col != header.size())
                throw DataError(path + ": multiple '" + label_column + "' columns");
            label_col = i;
        }
    }
    if (label_col == header.size())
        throw DataError(path + ": no '" + label_column + "' column in header");
    if (header.size() < 2)
        throw DataError(path + ": need at least one feature column");

    const std::size_t d = header.size() - 1;
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ": row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " columns, got " +
                            std::to_string(cells.size()));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_col) {
                long lab = 0;
                if (!parse_label(cells[i], lab))
                    throw DataError(path + ": row " + std::to_string(row) +
                                    ": label is not an integer: '" + cells[i] + "'");
                if (lab < 0)
                    throw DataError(path + ": row " + std::to_string(row) +
                                    ": negative label " + std::to_string(lab));
                labels.push_back(static_cast<int>(lab));
            } else {
                double v = 0.0;
                if (!parse_double(cells[i], v))
                    throw DataError(path + ": row " + std::to_string(row) + ", column '" +
                                    header[i] + "': not numeric: '" + cells[i] + "'");
                values.push_back(v);
            }
        }
    }
    if (labels.empty()) throw DataError(path + ": no data rows");

    TaskDataset ds;
    ds.name = name.empty() ? stem_of(path) : name;
    ds.features = Matrix(labels.size(), d);
    ds.features.data = std::move(values);
    ds.labels = std::move(labels);
    ds.num_classes = 1 + static_cast<std::size_t>(
                             *std::max_element(ds.labels.begin(), ds.labels.end()));
    return ds;
}

void write_dataset_csv(const TaskDataset& ds, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw DataError("cannot write dataset file: " + path);
    std::fputs("label", f);
    for (std::size_t j = 0; j < ds.dim(); ++j) std::fprintf(f, ",x%zu", j);
    std::fputc('\n', f);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::fprintf(f, "%d", ds.labels[i]);
        for (std::size_t j = 0; j < ds.dim(); ++j)
            std::fprintf(f, ",%.17g", ds.features(i, j));
        std::fputc('\n', f);
    }
    std::fclose(f);
}

StandardizationParams fit_standardization(const TaskDataset& train) {
    const std::size_t n = train.size();
    if (n < 2) throw std::invalid_argument("fit_standardization: need at least 2 samples");
    const std::size_t d = train.dim();
    StandardizationParams p;
    p.mean.assign(d, 0.0);
    p.std.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) p.mean[j] += train.features(i, j);
    for (std::size_t j = 0; j < d; ++j) p.mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = train.features(i, j) - p.mean[j];
            p.std[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j) {
        p.std[j] = std::sqrt(p.std[j] / static_cast<double>(n));
        if (p.std[j] == 0.0) p.std[j] = 1.0;  // constant-column guard
    }
    return p;
}

TaskDataset apply_standardization(const StandardizationParams& params, const TaskDataset& ds) {
    if (params.mean.size() != ds.dim())
        throw std::invalid_argument("apply_standardization: dimension mismatch");
    TaskDataset out = ds;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < out.dim(); ++j)
            out.features(i, j) = (out.features(i, j) - params.mean[j]) / params.std[j];
    return out;
}

SplitDataset split_dataset(const TaskDataset& ds, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (!(ratios[0] > 0 && ratios[1] > 0 && ratios[2] > 0) || std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: ratios must be positive and sum to 1");
    if (ds.size() < 10) throw std::invalid_argument("split_dataset: need at least 10 samples");

    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    RandomStream rs(seed, 0x5bd1);
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;  // sparse class ids allowed in labels
        RandomStream cs = rs.derive(c);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[cs.next_below(i)]);
        const double nc = static_cast<double>(idx.size());
        const std::size_t n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(nc * ratios[1])));
        const std::size_t n_test = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(nc * ratios[2])));
        if (idx.size() < n_val + n_test + 1)
            throw DataError("split_dataset: class " + std::to_string(c) +
                            " has too few samples (" + std::to_string(idx.size()) +
                            ") for a stratified split");
        const std::size_t n_train = idx.size() - n_val - n_test;
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
        val_idx.insert(val_idx.end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
        test_idx.insert(test_idx.end(), idx.begin() + n_train + n_val, idx.end());
    }

    auto take = [&](const std::vector<std::size_t>& idx) {
        TaskDataset part;
        part.name = ds.name;
        part.num_classes = ds.num_classes;
        part.features = Matrix(idx.size(), ds.dim());
        part.labels.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            part.labels[i] = ds.labels[idx[i]];
            for (std::size_t j = 0; j < ds.dim(); ++j)
                part.features(i, j) = ds.features(idx[i], j);
        }
        return part;
    };

    SplitDataset out;
    out.name = ds.name;
    out.split_seed = seed;
    out.train = take(train_idx);
    out.val = take(val_idx);
    out.test = take(test_idx);
    return out;
}

SplitDataset standardize_split(const SplitDataset& split) {
    const auto params = fit_standardization(split.train);
    SplitDataset out = split;
    out.train = apply_standardization(params, split.train);
    out.val = apply_standardization(params, split.val);
    out.test = apply_standardization(params, split.test);
    return out;
}

namespace {

// Seeded random rotation: QR of a Gaussian matrix via modified Gram-Schmidt.
std::vector<double> random_rotation(std::size_t d, RandomStream& rs) {
    std::vector<double> q(d * d);
    for (auto& x : q) x = rs.next_normal();
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += q[i * d + k] * q[i * d + j];
            for (std::size_t i = 0; i < d; ++i) q[i * d + j] -= dot * q[i * d + k];
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) norm += q[i * d + j] * q[i * d + j];
        norm = std::sqrt(norm);
        if (norm < 1e-12) norm = 1.0;
        for (std::size_t i = 0; i < d; ++i) q[i * d + j] /= norm;
    }
    return q;
}

}  // namespace

TaskDataset gen_synthetic_task(const SyntheticTaskSpec& spec) {
    if (spec.num_classes < 1 || spec.samples_per_class < 1 || spec.feature_dim < 1)
        throw std::invalid_argument("gen_synthetic_task: counts must be >= 1");
    if (!(spec.cluster_scale > 0))
        throw std::invalid_argument("gen_synthetic_task: cluster_scale must be > 0");
    if (!(spec.cluster_separation >= 0))
        throw std::invalid_argument("gen_synthetic_task: cluster_separation must be >= 0");

    const std::size_t c_count = spec.num_classes;
    const std::size_t d = spec.feature_dim;
    RandomStream rs(spec.seed, 0xc1a55);
    RandomStream rot_rs = rs.derive(0);
    RandomStream noise_rs = rs.derive(1);

    // Class centers: equally spaced on a circle in the first two coordinates,
    // rotated by a seeded random rotation; evenly spaced on a segment for d=1.
    std::vector<double> centers(c_count * d, 0.0);
    if (d >= 2) {
        const auto q = random_rotation(d, rot_rs);
        for (std::size_t c = 0; c < c_count; ++c) {
            const double angle = 2.0 * 3.14159265358979323846 *
                                 static_cast<double>(c) / static_cast<double>(c_count);
            const double fx = std::cos(angle);
            const double fy = std::sin(angle);
            for (std::size_t i = 0; i < d; ++i)
                centers[c * d + i] =
                    spec.cluster_separation * (q[i * d + 0] * fx + q[i * d + 1] * fy);
        }
    } else {
        for (std::size_t c = 0; c < c_count; ++c)
            centers[c] = c_count == 1
                             ? 0.0
                             : -spec.cluster_separation +
                                   2.0 * spec.cluster_separation * static_cast<double>(c) /
                                       static_cast<double>(c_count - 1);
    }

    TaskDataset ds;
    ds.name = spec.name;
    ds.num_classes = c_count;
    ds.features = Matrix(c_count * spec.samples_per_class, d);
    ds.labels.resize(ds.features.rows);
    std::size_t row = 0;
    for (std::size_t c = 0; c < c_count; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
            ds.labels[row] = static_cast<int>(c);
            for (std::size_t i = 0; i < d; ++i)
                ds.features(row, i) =
                    centers[c * d + i] + spec.cluster_scale * noise_rs.next_normal();
        }
    }
    return ds;
}

TaskSequence make_sequence(const std::vector<SplitDataset>& datasets,
                           const std::vector<std::size_t>& order) {
    if (order.size() != datasets.size())
        throw std::invalid_argument("make_sequence: order length must match dataset count");
    std::vector<bool> seen(datasets.size(), false);
    for (std::size_t i : order) {
        if (i >= datasets.size() || seen[i])
            throw std::invalid_argument("make_sequence: order is not a permutation");
        seen[i] = true;
    }
    TaskSequence seq;
    for (std::size_t i : order) {
        if (!seq.tasks.empty() && datasets[i].train.dim() != seq.tasks.front().train.dim())
            throw std::invalid_argument("make_sequence: feature dimension mismatch across tasks");
        seq.tasks.push_back(datasets[i]);
        if (!seq.label.empty()) seq.label += "-";
        seq.label += datasets[i].name;
    }
    return seq;
}

}  // namespace bvcl
