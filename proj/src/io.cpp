// Copyright 2026 The cnodsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cnod/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <png.h>

namespace cnod {

namespace {

const char kMagic[] = "cnodsim-state v1";

}  // namespace

void save_state(const State &state, const std::string &path, const std::vector<std::string> &meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("io_error", "cannot write " + path);
    }
    const auto &dims = state.space().mode_dims();
    out << kMagic << "\n";
    out << "kind=" << (state.is_pure() ? "ket" : "density") << "\n";
    out << "dims=";
    for (std::size_t k = 0; k < dims.size(); ++k) {
        out << (k ? "," : "") << dims[k];
    }
    out << "\n";
    for (const auto &m : meta) {
        if (m.find('\n') != std::string::npos) {
            throw Error("validation_error", "state metadata must be single-line");
        }
        out << "# " << m << "\n";
    }
    out << "data\n";
    auto put = [&](cx v) {
        double re = v.real(), im = v.imag();
        out.write(reinterpret_cast<const char *>(&re), sizeof(double));
        out.write(reinterpret_cast<const char *>(&im), sizeof(double));
    };
    if (state.is_pure()) {
        const CVec &k = state.ket();
        for (Eigen::Index i = 0; i < k.size(); ++i) {
            put(k[i]);
        }
    } else {
        const CMat &r = state.rho();
        for (Eigen::Index i = 0; i < r.rows(); ++i) {
            for (Eigen::Index j = 0; j < r.cols(); ++j) {
                put(r(i, j));
            }
        }
    }
    if (!out) {
        throw Error("io_error", "write failed for " + path);
    }
}

namespace {

struct StateHeader {
    bool ket = true;
    std::vector<int> dims;
    std::vector<std::string> meta;
};

StateHeader read_header(std::ifstream &in, const std::string &path) {
    std::string line;
    if (!std::getline(in, line) || line != kMagic) {
        throw Error("parse_error", path + ": not a cnodsim state file");
    }
    StateHeader h;
    bool have_kind = false;
    while (std::getline(in, line)) {
        if (line == "data") {
            if (!have_kind || h.dims.empty()) {
                throw Error("parse_error", path + ": state header lacks kind or dims");
            }
            return h;
        }
        if (line.rfind("# ", 0) == 0) {
            h.meta.push_back(line.substr(2));
        } else if (line.rfind("kind=", 0) == 0) {
            std::string k = line.substr(5);
            if (k != "ket" && k != "density") {
                throw Error("parse_error", path + ": unknown state kind " + k);
            }
            h.ket = k == "ket";
            have_kind = true;
        } else if (line.rfind("dims=", 0) == 0) {
            std::stringstream ss(line.substr(5));
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    h.dims.push_back(std::stoi(item));
                } catch (const std::logic_error &) {
                    throw Error("parse_error", path + ": bad dims entry");
                }
            }
        } else {
            throw Error("parse_error", path + ": unexpected header line");
        }
    }
    throw Error("parse_error", path + ": missing data section");
}

}  // namespace

State load_state(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("io_error", "cannot read " + path);
    }
    StateHeader h = read_header(in, path);
    HilbertSpace space(h.dims);
    auto get = [&]() {
        double v[2];
        if (!in.read(reinterpret_cast<char *>(v), sizeof(v))) {
            throw Error("parse_error", path + ": truncated state data");
        }
        return cx(v[0], v[1]);
    };
    int n = space.dim();
    if (h.ket) {
        CVec k(n);
        for (int i = 0; i < n; ++i) {
            k[i] = get();
        }
        return State::from_ket(k, space);
    }
    CMat r(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            r(i, j) = get();
        }
    }
    return State::from_density(r, space);
}

std::vector<std::string> state_metadata(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("io_error", "cannot read " + path);
    }
    return read_header(in, path).meta;
}

// ---- PNG ----

namespace {

using Rgb = std::array<unsigned char, 3>;

struct Canvas {
    int w, h;
    std::vector<unsigned char> px;
    Canvas(int width, int height) : w(width), h(height), px(static_cast<std::size_t>(width) * height * 3, 255) {}
    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= w || y >= h) {
            return;
        }
        std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
        px[i] = c[0];
        px[i + 1] = c[1];
        px[i + 2] = c[2];
    }
    void line(int x0, int y0, int x1, int y1, Rgb c) {
        int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) {
                break;
            }
            int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }
};

void write_png(const std::string &path, const Canvas &c, const PngMeta &meta) {
    FILE *fp = std::fopen(path.c_str(), "wb");
    if (!fp) {
        throw Error("io_error", "cannot write " + path);
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw Error("io_error", "PNG encoding failed for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, c.w, c.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    std::vector<std::string> keys, vals;
    for (const auto &[k, v] : meta) {
        keys.push_back(k.substr(0, 79));
        vals.push_back(v);
    }
    std::vector<png_text> text(meta.size());
    for (std::size_t i = 0; i < meta.size(); ++i) {
        std::memset(&text[i], 0, sizeof(png_text));
        text[i].compression = PNG_TEXT_COMPRESSION_NONE;
        text[i].key = keys[i].data();
        text[i].text = vals[i].data();
    }
    if (!text.empty()) {
        png_set_text(png, info, text.data(), static_cast<int>(text.size()));
    }
    png_write_info(png, info);
    for (int y = 0; y < c.h; ++y) {
        png_write_row(png, const_cast<png_bytep>(&c.px[static_cast<std::size_t>(y) * c.w * 3]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

// Blue (-1) - white (0) - red (+1).
Rgb diverging(double t) {
    t = std::clamp(t, -1.0, 1.0);
    auto mix = [](double a, double b, double u) { return static_cast<unsigned char>(std::lround(a + (b - a) * u)); };
    if (t < 0.0) {
        double u = -t;
        return {mix(255, 33, u), mix(255, 102, u), mix(255, 172, u)};
    }
    return {mix(255, 178, t), mix(255, 24, t), mix(255, 43, t)};
}

}  // namespace

void write_heatmap_png(const std::string &path, const RMat &values, double vmax, const PngMeta &meta) {
    if (values.size() == 0) {
        throw Error("validation_error", "empty heatmap");
    }
    if (vmax <= 0.0) {
        vmax = std::max(values.cwiseAbs().maxCoeff(), 1e-300);
    }
    int rows = static_cast<int>(values.rows()), cols = static_cast<int>(values.cols());
    int cell = std::max(1, 480 / std::max(rows, cols));
    Canvas c(cols * cell, rows * cell);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            Rgb col = diverging(values(i, j) / vmax);
            for (int y = 0; y < cell; ++y) {
                for (int x = 0; x < cell; ++x) {
                    c.set(j * cell + x, i * cell + y, col);
                }
            }
        }
    }
    write_png(path, c, meta);
}

void write_lines_png(const std::string &path, const std::vector<PlotSeries> &series, const PngMeta &meta) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto &s : series) {
        if (s.x.size() != s.y.size()) {
            throw Error("validation_error", "plot series x and y differ in length");
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!(x1 > x0)) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if (!(y1 > y0)) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const int W = 640, H = 400, m = 30;
    Canvas c(W, H);
    auto px = [&](double x) { return m + static_cast<int>(std::lround((x - x0) / (x1 - x0) * (W - 2 * m))); };
    auto py = [&](double y) { return H - m - static_cast<int>(std::lround((y - y0) / (y1 - y0) * (H - 2 * m))); };
    const Rgb grey{150, 150, 150};
    c.line(m, m, W - m, m, grey);
    c.line(m, H - m, W - m, H - m, grey);
    c.line(m, m, m, H - m, grey);
    c.line(W - m, m, W - m, H - m, grey);
    if (y0 < 0.0 && y1 > 0.0) {
        c.line(m, py(0.0), W - m, py(0.0), {210, 210, 210});
    }
    const Rgb palette[] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}};
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto &s = series[k];
        for (std::size_t i = 1; i < s.x.size(); ++i) {
            c.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), palette[k % 5]);
        }
    }
    write_png(path, c, meta);
}

}  // namespace cnod
