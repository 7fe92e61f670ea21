#include "tsrank/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tsrank {

int TimeSeriesDataset::train_end() const {
    const int tot = split_train + split_val + split_test;
    return static_cast<int>(static_cast<long long>(rows) * split_train / tot);
}

int TimeSeriesDataset::val_end() const {
    const int tot = split_train + split_val + split_test;
    return static_cast<int>(static_cast<long long>(rows) * (split_train + split_val) / tot);
}

std::vector<double> TimeSeriesDataset::window(int channel, int first, int len) const {
    std::vector<double> out(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) out[i] = at(first + i, channel);
    return out;
}

static std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

static bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

static bool is_missing(const std::string& s) {
    return s.empty() || s == "nan" || s == "NaN" || s == "NA" || s == "null";
}

TimeSeriesDataset load_dataset(const std::string& path, const LoadOptions& opts) {
    std::ifstream f(path);
    if (!f) throw LoadError("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(f, line)) throw LoadError(path + ": empty file");
    std::vector<std::string> header = split_csv_line(line);

    std::vector<std::vector<std::string>> raw;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        raw.push_back(split_csv_line(line));
    }
    if (raw.empty()) throw LoadError(path + ": no data rows");

    // optional leading timestamp column: first cell of first data row non-numeric
    double probe;
    int first_col = 0;
    if (!parse_number(raw[0][0], probe) && !is_missing(raw[0][0])) first_col = 1;

    const int cols = static_cast<int>(header.size()) - first_col;
    if (cols < 1) throw LoadError(path + ": no value columns");

    TimeSeriesDataset ds;
    ds.id = path;
    ds.rows = static_cast<int>(raw.size());
    ds.cols = cols;
    ds.values.assign(static_cast<std::size_t>(ds.rows) * cols, 0.0);
    for (int r = 0; r < ds.rows; ++r) {
        if (static_cast<int>(raw[r].size()) != static_cast<int>(header.size()))
            throw LoadError(path + ": ragged row " + std::to_string(r + 2) + " has " +
                            std::to_string(raw[r].size()) + " cells, expected " +
                            std::to_string(header.size()));
        for (int c = 0; c < cols; ++c) {
            const std::string& cell = raw[r][first_col + c];
            double v;
            if (is_missing(cell) || (parse_number(cell, v) && !std::isfinite(v))) {
                if (!opts.forward_fill || r == 0)
                    throw LoadError(path + ": missing value at row " + std::to_string(r + 2) +
                                    ", column " + std::to_string(first_col + c + 1));
                ds.at(r, c) = ds.at(r - 1, c);
            } else if (parse_number(cell, v)) {
                ds.at(r, c) = v;
            } else {
                throw LoadError(path + ": non-numeric cell '" + cell + "' at row " +
                                std::to_string(r + 2) + ", column " +
                                std::to_string(first_col + c + 1));
            }
        }
    }
    if (ds.rows < opts.min_rows)
        throw LoadError(path + ": only " + std::to_string(ds.rows) + " rows, need at least " +
                        std::to_string(opts.min_rows));
    if (!opts.allow_constant) {
        for (int c = 0; c < cols; ++c) {
            bool constant = true;
            for (int r = 1; r < ds.rows && constant; ++r)
                if (ds.at(r, c) != ds.at(0, c)) constant = false;
            if (constant)
                throw LoadError(path + ": column " + std::to_string(first_col + c + 1) +
                                " is constant");
        }
    }
    return ds;
}

void save_dataset_csv(const TimeSeriesDataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw LoadError("cannot write dataset file: " + path);
    for (int c = 0; c < ds.cols; ++c) f << (c ? "," : "") << "ch" << c;
    f << "\n";
    char buf[64];
    for (int r = 0; r < ds.rows; ++r) {
        for (int c = 0; c < ds.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.at(r, c));
            f << (c ? "," : "") << buf;
        }
        f << "\n";
    }
}

}  // namespace tsrank
