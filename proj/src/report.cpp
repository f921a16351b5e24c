#include "dpsl/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "dpsl/moe.hpp"

namespace dpsl::harness {

namespace fs = std::filesystem;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out)
        throw std::runtime_error("emit_report: cannot open " + p.string());
    return out;
}

std::vector<std::string> distinct_tags(const shaping::ProbBatch& batch) {
    std::vector<std::string> tags;
    if (batch.tags.empty()) {
        tags.emplace_back("all");
        return tags;
    }
    for (const auto& t : batch.tags)
        if (std::find(tags.begin(), tags.end(), t) == tags.end())
            tags.push_back(t);
    return tags;
}

Eigen::VectorXd column_for_tag(const shaping::ProbBatch& batch, const std::string& tag,
                               Eigen::Index k) {
    std::vector<double> vals;
    for (Eigen::Index r = 0; r < batch.probs.rows(); ++r) {
        if (batch.tags.empty() || batch.tags[static_cast<std::size_t>(r)] == tag)
            vals.push_back(batch.probs(r, k));
    }
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

const DirichletPrior* prior_for_tag(const std::map<std::string, DirichletPrior>& priors,
                                    const std::string& tag) {
    auto it = priors.find(tag);
    if (it == priors.end())
        it = priors.find("default");
    return it == priors.end() ? nullptr : &it->second;
}

void write_simplex_svg(const fs::path& path, const shaping::ProbBatch& batch) {
    const Eigen::MatrixXd xy = moe::simplex_project(batch.probs);
    const double w = 640.0, h = 600.0, margin = 40.0;
    const double scale = w - 2.0 * margin;
    auto px = [&](double x) { return margin + x * scale; };
    auto py = [&](double y) { return h - margin - y * scale; };

    static const char* kColors[] = {"#419566", "#9c7ddd", "#f9bc0a", "#91d1ec",
                                    "#d1604d", "#4a6fa5"};
    const auto tags = distinct_tags(batch);

    std::ofstream out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
        << "\" height=\"" << h << "\">\n";
    out << "<polygon points=\"" << px(0) << ',' << py(0) << ' ' << px(1) << ',' << py(0)
        << ' ' << px(0.5) << ',' << py(0.8660254037844386)
        << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1.5\"/>\n";
    for (Eigen::Index r = 0; r < xy.rows(); ++r) {
        std::size_t ci = 0;
        if (!batch.tags.empty()) {
            const auto& tag = batch.tags[static_cast<std::size_t>(r)];
            ci = static_cast<std::size_t>(
                     std::find(tags.begin(), tags.end(), tag) - tags.begin()) %
                 (sizeof kColors / sizeof kColors[0]);
        }
        out << "<circle cx=\"" << px(xy(r, 0)) << "\" cy=\"" << py(xy(r, 1))
            << "\" r=\"2.5\" fill=\"" << kColors[ci] << "\" fill-opacity=\"0.6\"/>\n";
    }
    double ly = 20.0;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        out << "<circle cx=\"16\" cy=\"" << ly - 4 << "\" r=\"4\" fill=\""
            << kColors[i % (sizeof kColors / sizeof kColors[0])] << "\"/>"
            << "<text x=\"26\" y=\"" << ly << "\" font-size=\"13\">" << tags[i]
            << "</text>\n";
        ly += 18.0;
    }
    out << "</svg>\n";
}

} // namespace

std::vector<std::string> emit_report(RunReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    report.manifest.clear();
    auto track = [&](const fs::path& p) { report.manifest.push_back(p.filename().string()); };

    const fs::path dir(out_dir);

    {
        auto out = open_out(dir / "loss.csv");
        out << "step,loss";
        for (const auto& n : report.aux_names) out << ',' << n;
        out << '\n';
        for (std::size_t s = 0; s < report.loss_trace.size(); ++s) {
            out << s << ',' << fmt17(report.loss_trace[s]);
            if (s < report.aux_trace.size())
                for (double v : report.aux_trace[s]) out << ',' << fmt17(v);
            out << '\n';
        }
        track(dir / "loss.csv");
    }

    const Eigen::Index k_count = report.final_probs.probs.cols();
    if (report.final_probs.probs.size() > 0) {
        auto out = open_out(dir / "probs_final.csv");
        out << "row,source_tag";
        for (Eigen::Index k = 0; k < k_count; ++k) out << ",p_" << k;
        out << '\n';
        for (Eigen::Index r = 0; r < report.final_probs.probs.rows(); ++r) {
            out << r << ','
                << (report.final_probs.tags.empty()
                        ? "all"
                        : report.final_probs.tags[static_cast<std::size_t>(r)]);
            for (Eigen::Index k = 0; k < k_count; ++k)
                out << ',' << fmt17(report.final_probs.probs(r, k));
            out << '\n';
        }
        track(dir / "probs_final.csv");

        for (const auto& tag : distinct_tags(report.final_probs)) {
            const DirichletPrior* prior = prior_for_tag(report.priors, tag);
            for (Eigen::Index k = 0; k < k_count; ++k) {
                const Eigen::VectorXd col = column_for_tag(report.final_probs, tag, k);
                if (col.size() == 0) continue;
                const auto pos = shaping::empirical_cdf_positions(col);

                const std::string base = tag + "_" + std::to_string(k);
                {
                    auto out2 = open_out(dir / ("cdf_trace_" + base + ".csv"));
                    out2 << "x,empirical,target\n";
                    for (Eigen::Index j = 0; j < pos.sorted.size(); ++j) {
                        const double x = std::clamp(pos.sorted[j], 1e-12, 1.0 - 1e-12);
                        const double target =
                            prior ? specfun::beta_cdf(x, prior->marginal(k)) : 0.0;
                        out2 << fmt17(pos.sorted[j]) << ',' << fmt17(pos.ranks[j]) << ','
                             << fmt17(target) << '\n';
                    }
                    track(dir / ("cdf_trace_" + base + ".csv"));
                }
                {
                    constexpr int kBins = 40;
                    std::vector<int> counts(kBins, 0);
                    for (Eigen::Index j = 0; j < col.size(); ++j) {
                        int b = static_cast<int>(col[j] * kBins);
                        b = std::clamp(b, 0, kBins - 1);
                        counts[static_cast<std::size_t>(b)]++;
                    }
                    auto out2 = open_out(dir / ("hist_" + base + ".csv"));
                    out2 << "bin_lo,bin_hi,count,density,target_pdf\n";
                    for (int b = 0; b < kBins; ++b) {
                        const double lo = static_cast<double>(b) / kBins;
                        const double hi = static_cast<double>(b + 1) / kBins;
                        const double mid = std::clamp(0.5 * (lo + hi), 1e-12, 1.0 - 1e-12);
                        const double dens = counts[static_cast<std::size_t>(b)] * kBins /
                                            static_cast<double>(col.size());
                        const double target =
                            prior ? specfun::beta_pdf(mid, prior->marginal(k)) : 0.0;
                        out2 << fmt17(lo) << ',' << fmt17(hi) << ','
                             << counts[static_cast<std::size_t>(b)] << ',' << fmt17(dens)
                             << ',' << fmt17(target) << '\n';
                    }
                    track(dir / ("hist_" + base + ".csv"));
                }
            }
        }

        if (k_count == 3) {
            write_simplex_svg(dir / "simplex.svg", report.final_probs);
            track(dir / "simplex.svg");
        }
    }

    {
        auto out = open_out(dir / "cov.csv");
        out << "layer,cov\n";
        for (std::size_t l = 0; l < report.cov_per_layer.size(); ++l)
            out << l << ',' << fmt17(report.cov_per_layer[l]) << '\n';
        track(dir / "cov.csv");
    }

    {
        nlohmann::json j;
        j["config"] = report.config_echo;
        j["summary"] = report.summary;
        if (!report.cvm_final.empty()) {
            nlohmann::json cvm;
            for (const auto& [tag, vals] : report.cvm_final) cvm[tag] = vals;
            j["cvm_final"] = cvm;
        }
        if (!report.loss_trace.empty()) {
            j["initial_loss"] = report.loss_trace.front();
            j["final_loss"] = report.loss_trace.back();
        }
        auto out = open_out(dir / "report.json");
        out << j.dump(2) << '\n';
        track(dir / "report.json");
    }
    return report.manifest;
}

} // namespace dpsl::harness
