#include "madloop/output.hpp"

#include "madloop/errors.hpp"
#include "madloop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace madloop {

namespace fs = std::filesystem;

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_optional(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string();
}

namespace {

std::string header(bool modal) {
    return kTrajectoryHeader + (modal ? kModalColumns : "") + "\n";
}

std::vector<std::optional<double>> panel_values(const MetricPanel& m, bool modal) {
    std::vector<std::optional<double>> v{m.wd2, m.precision, m.recall, m.trace_cov};
    if (modal) {
        v.push_back(m.avg_modal_variance);
        v.push_back(m.mode_recall);
    }
    return v;
}

enum class Moment { mean, se };

std::string aggregate_csv(const std::vector<LoopResult>& results, bool modal, Moment moment) {
    std::size_t horizon = 0;
    for (const auto& r : results) {
        horizon = std::max(horizon, r.records.size());
    }
    const std::size_t columns = modal ? 6 : 4;
    std::string out = header(modal);
    for (std::size_t t = 0; t < horizon; ++t) {
        std::vector<std::vector<double>> samples(columns);
        for (const auto& r : results) {
            if (t < r.records.size()) {
                const auto v = panel_values(r.records[t].metrics, modal);
                for (std::size_t c = 0; c < columns; ++c) {
                    if (v[c]) {
                        samples[c].push_back(*v[c]);
                    }
                }
            }
        }
        out += std::to_string(t + 1);
        for (const auto& s : samples) {
            out += ',';
            if (!s.empty()) {
                const MeanSe ms = mean_se(s);
                out += format_number(moment == Moment::mean ? ms.mean : ms.se);
            }
        }
        out += '\n';
    }
    return out;
}

} // namespace

std::string trajectory_csv(const std::vector<LoopResult>& results, bool modal) {
    std::string out = header(modal);
    for (const auto& r : results) {
        for (const auto& rec : r.records) {
            out += std::to_string(rec.t);
            for (const auto& v : panel_values(rec.metrics, modal)) {
                out += ',' + format_optional(v);
            }
            out += '\n';
        }
    }
    return out;
}

std::string trajectory_mean_csv(const std::vector<LoopResult>& results, bool modal) {
    return aggregate_csv(results, modal, Moment::mean);
}

std::string trajectory_se_csv(const std::vector<LoopResult>& results, bool modal) {
    return aggregate_csv(results, modal, Moment::se);
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::string out = kSweepHeader + "\n";
    for (const auto& c : cells) {
        out += std::to_string(c.n_r) + ',' + std::to_string(c.n_s) + ',' + format_number(c.lambda) + ',';
        if (c.ess) {
            out += format_number(c.ess->n_e) + ',' + format_number(c.ess->ratio) + ',' +
                   (c.ess->admissible ? "1" : "0");
        } else {
            out += ",,";
        }
        out += ',';
        if (c.limit) {
            out += format_number(c.limit->limit_wd2) + ',' + format_number(c.limit->se);
        } else {
            out += ',';
        }
        std::string status = c.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        out += ',' + status + '\n';
    }
    return out;
}

std::string frontier_csv(const std::vector<FrontierPoint>& frontier) {
    std::string out = "n_r,lambda,memory_k,max_admissible_n_s\n";
    for (const auto& f : frontier) {
        out += std::to_string(f.n_r) + ',' + format_number(f.lambda) + ',' + std::to_string(f.memory_k) + ',' +
               (f.max_admissible_n_s ? std::to_string(*f.max_admissible_n_s) : std::string()) + '\n';
    }
    return out;
}

std::string baseline_csv(const BaselineCurve& curve) {
    std::string out = "n,mean_wd2,se,smoothed\n";
    for (std::size_t i = 0; i < curve.n.size(); ++i) {
        out += std::to_string(curve.n[i]) + ',' + format_number(curve.mean_wd2[i]) + ',' + format_number(curve.se[i]) +
               ',' + format_number(curve.smoothed[i]) + '\n';
    }
    return out;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
    std::string out = "p,lambda,total_n,n_r,n_s,generations,limit_wd2,se,status\n";
    for (const auto& r : rows) {
        out += format_number(r.p) + ',' + format_number(r.lambda) + ',' + std::to_string(r.total_n) + ',' +
               std::to_string(r.config.real_per_generation()) + ',' + std::to_string(r.config.synthetic_per_generation()) +
               ',' + std::to_string(r.config.generations) + ',';
        if (r.limit) {
            out += format_number(r.limit->limit_wd2) + ',' + format_number(r.limit->se);
        } else {
            out += ',';
        }
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        out += ',' + status + '\n';
    }
    return out;
}

std::string scaling_slopes_csv(const std::vector<ScalingSlope>& slopes) {
    std::string out = "p,lambda,slope,slope_se,trailing_slope,points\n";
    for (const auto& s : slopes) {
        out += format_number(s.p) + ',' + format_number(s.lambda) + ',' + format_number(s.slope) + ',' +
               format_number(s.slope_se) + ',' + format_number(s.trailing_slope) + ',' + std::to_string(s.points) + '\n';
    }
    return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write '" + tmp.string() + "'");
        }
        out << content;
        out.flush();
        if (!out) {
            throw Error("short write to '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

int CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read '" + path.string() + "'");
    }
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') {
            cells.emplace_back();
        }
        return cells;
    };
    CsvTable table;
    std::string line;
    if (std::getline(in, line)) {
        table.header = split(line);
    }
    while (std::getline(in, line)) {
        if (!line.empty()) {
            table.rows.push_back(split(line));
        }
    }
    return table;
}

} // namespace madloop
