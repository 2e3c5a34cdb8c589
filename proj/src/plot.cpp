#include "pheno/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "pheno/common.hpp"

namespace pheno::plot {

namespace {

constexpr const char* kClassColor[] = {"#1f77b4", "#d62728"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Maps a data rectangle onto a pixel rectangle (y grows downward).
struct Frame {
    double x0, x1, y0, y1;  // data range
    double left, top, width, height;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
    double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

void widen(double& lo, double& hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
}

std::string polyline(const Frame& f, std::span<const double> xs, std::span<const double> ys, const char* cls,
                     const char* stroke, const char* extra = "") {
    std::ostringstream o;
    o << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << stroke << "\" " << extra << " points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) o << (i ? " " : "") << num(f.px(xs[i])) << ',' << num(f.py(ys[i]));
    o << "\"/>\n";
    return o.str();
}

std::string header(int w, int h) {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
           std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    std::ostringstream o;
    o << "<rect class=\"axes\" x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.width)
      << "\" height=\"" << num(f.height) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    o << "<text x=\"" << num(f.left) << "\" y=\"" << num(f.top + f.height + 16) << "\" font-size=\"11\">"
      << num(f.x0) << "</text>\n";
    o << "<text x=\"" << num(f.left + f.width) << "\" y=\"" << num(f.top + f.height + 16)
      << "\" font-size=\"11\" text-anchor=\"end\">" << num(f.x1) << "</text>\n";
    o << "<text x=\"" << num(f.left - 4) << "\" y=\"" << num(f.top + f.height) << "\" font-size=\"11\" text-anchor=\"end\">"
      << num(f.y0) << "</text>\n";
    o << "<text x=\"" << num(f.left - 4) << "\" y=\"" << num(f.top + 10) << "\" font-size=\"11\" text-anchor=\"end\">"
      << num(f.y1) << "</text>\n";
    o << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"" << num(f.top + f.height + 32)
      << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
    o << "<text x=\"14\" y=\"" << num(f.top + f.height / 2) << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << num(f.top + f.height / 2) << ")\">" << escape(ylabel) << "</text>\n";
    return o.str();
}

}  // namespace

std::string series_overlay_svg(const cohort::LabSeries& original, std::span<const double> warped_times,
                               const gpr::InterpolatedSeries& interp) {
    if (warped_times.size() != original.times.size()) throw PreconditionError("overlay: warped length mismatch");
    std::vector<double> upper, lower;
    for (std::size_t i = 0; i < interp.means.size(); ++i) {
        const double sd = std::sqrt(std::max(0.0, interp.variances[i]));
        upper.push_back(interp.means[i] + sd);
        lower.push_back(interp.means[i] - sd);
    }

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto extend = [](double& lo, double& hi, std::span<const double> v) {
        for (double d : v) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    };
    extend(x0, x1, original.times);
    extend(x0, x1, warped_times);
    extend(x0, x1, interp.grid_times);
    extend(y0, y1, original.values);
    extend(y0, y1, upper);
    extend(y0, y1, lower);
    widen(x0, x1);
    widen(y0, y1);
    const Frame f{x0, x1, y0, y1, 70, 40, 540, 300};

    std::ostringstream o;
    o << header(640, 400);
    o << "<text x=\"320\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">admission " << original.hadm_id
      << " (label " << original.label << ")</text>\n";
    o << axes(f, "days", "value");

    // band polygon: upper left-to-right, then lower right-to-left
    o << "<polygon class=\"band\" fill=\"#1f77b4\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < upper.size(); ++i) o << (i ? " " : "") << num(f.px(interp.grid_times[i])) << ',' << num(f.py(upper[i]));
    for (std::size_t i = lower.size(); i-- > 0;) o << ' ' << num(f.px(interp.grid_times[i])) << ',' << num(f.py(lower[i]));
    o << "\"/>\n";
    o << polyline(f, interp.grid_times, upper, "band-upper", "#1f77b4", "stroke-dasharray=\"4 3\"");
    o << polyline(f, interp.grid_times, lower, "band-lower", "#1f77b4", "stroke-dasharray=\"4 3\"");
    o << polyline(f, interp.grid_times, interp.means, "mean", "#1f77b4", "stroke-width=\"2\"");
    o << polyline(f, warped_times, original.values, "warped", "#d62728");
    o << polyline(f, original.times, original.values, "original", "black");
    for (std::size_t i = 0; i < original.times.size(); ++i) {
        o << "<circle class=\"sample\" cx=\"" << num(f.px(original.times[i])) << "\" cy=\""
          << num(f.py(original.values[i])) << "\" r=\"3\" fill=\"black\"/>\n";
    }
    o << "<text x=\"600\" y=\"50\" font-size=\"11\" text-anchor=\"end\">black: original, red: warped, blue: GPR mean &#177; 1 sd</text>\n";
    o << "</svg>\n";
    return o.str();
}

std::string signature_grid_svg(const Eigen::MatrixXd& signatures, std::size_t patch_len) {
    const auto n = static_cast<std::size_t>(signatures.rows());
    if (static_cast<std::size_t>(signatures.cols()) != 2 * patch_len) {
        throw PreconditionError("signature grid: width must be 2 * patch_len");
    }
    constexpr std::size_t kCols = 10;
    constexpr double kPanelW = 90, kPanelH = 60, kGap = 6, kMargin = 20;
    const std::size_t rows = (n + kCols - 1) / kCols;
    const int width = static_cast<int>(2 * kMargin + kCols * (kPanelW + kGap));
    const int height = static_cast<int>(2 * kMargin + 20 + rows * (kPanelH + kGap));

    std::ostringstream o;
    o << header(width, height);
    o << "<text x=\"" << width / 2 << "\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">first-layer weights ("
      << n << " units)</text>\n";
    std::vector<double> xs(patch_len);
    for (std::size_t j = 0; j < patch_len; ++j) xs[j] = static_cast<double>(j);
    for (std::size_t k = 0; k < n; ++k) {
        const Eigen::VectorXd w = signatures.row(static_cast<Eigen::Index>(k)).transpose();
        double lo = w.minCoeff(), hi = w.maxCoeff();
        widen(lo, hi);
        const double left = kMargin + static_cast<double>(k % kCols) * (kPanelW + kGap);
        const double top = kMargin + 20 + static_cast<double>(k / kCols) * (kPanelH + kGap);
        const Frame f{0.0, std::max(1.0, static_cast<double>(patch_len) - 1.0), lo, hi, left, top, kPanelW, kPanelH};
        const std::vector<double> means(w.data(), w.data() + patch_len);
        const std::vector<double> vars(w.data() + patch_len, w.data() + 2 * patch_len);
        o << "<g class=\"panel\">\n";
        o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(kPanelW) << "\" height=\""
          << num(kPanelH) << "\" fill=\"none\" stroke=\"#bbb\"/>\n";
        o << polyline(f, xs, means, "signature-mean", "#1f77b4");
        o << polyline(f, xs, vars, "signature-variance", "#ff7f0e");
        o << "</g>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string scatter_svg(const Eigen::MatrixXd& coords, std::span<const int> labels, const std::string& title) {
    if (coords.cols() != 2 || static_cast<std::size_t>(coords.rows()) != labels.size()) {
        throw PreconditionError("scatter: expected n x 2 coordinates with n labels");
    }
    double x0 = coords.rows() ? coords.col(0).minCoeff() : 0.0, x1 = coords.rows() ? coords.col(0).maxCoeff() : 1.0;
    double y0 = coords.rows() ? coords.col(1).minCoeff() : 0.0, y1 = coords.rows() ? coords.col(1).maxCoeff() : 1.0;
    widen(x0, x1);
    widen(y0, y1);
    const Frame f{x0, x1, y0, y1, 50, 40, 500, 500};
    std::ostringstream o;
    o << header(600, 600);
    o << "<text x=\"300\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
    o << "<rect class=\"axes\" x=\"50\" y=\"40\" width=\"500\" height=\"500\" fill=\"none\" stroke=\"#444\"/>\n";
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
        const int l = labels[static_cast<std::size_t>(i)] == 1 ? 1 : 0;
        o << "<circle class=\"point label" << l << "\" cx=\"" << num(f.px(coords(i, 0))) << "\" cy=\""
          << num(f.py(coords(i, 1))) << "\" r=\"2.5\" fill=\"" << kClassColor[l] << "\" fill-opacity=\"0.7\"/>\n";
    }
    o << "<text x=\"550\" y=\"560\" font-size=\"11\" text-anchor=\"end\" fill=\"" << kClassColor[0]
      << "\">label 0</text>\n";
    o << "<text x=\"550\" y=\"576\" font-size=\"11\" text-anchor=\"end\" fill=\"" << kClassColor[1]
      << "\">label 1</text>\n";
    o << "</svg>\n";
    return o.str();
}

void write_svg(const std::filesystem::path& path, const std::string& svg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << svg;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace pheno::plot
