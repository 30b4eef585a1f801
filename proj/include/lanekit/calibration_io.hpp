#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lanekit/calibration.hpp"
#include "lanekit/error.hpp"

namespace lanekit {

// Calibration file: a flat JSON object. Exact key names are part of the format;
// unknown keys are ignored. k3 and skew may be absent (older files) and default to 0.

inline void save_model(const CameraModel& m, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["image_width"] = m.image_width;
    j["image_height"] = m.image_height;
    j["fx"] = m.fx;
    j["fy"] = m.fy;
    j["cx"] = m.cx;
    j["cy"] = m.cy;
    j["skew"] = m.skew;
    j["k1"] = m.k1;
    j["k2"] = m.k2;
    j["k3"] = m.k3;
    j["p1"] = m.p1;
    j["p2"] = m.p2;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::FileError, "cannot write " + path.string());
    // nlohmann serializes doubles with round-trip precision.
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::FileError, "failed writing " + path.string());
}

inline CameraModel parse_model(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("calibration file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "calibration file must hold a JSON object");

    auto number = [&](const char* key, bool required, double fallback) -> double {
        const auto it = j.find(key);
        if (it == j.end()) {
            if (required) throw Error(ErrorKind::ParseError, std::string("missing field \"") + key + "\"");
            return fallback;
        }
        if (!it->is_number()) throw Error(ErrorKind::ParseError, std::string("field \"") + key + "\" is not a number");
        return it->get<double>();
    };
    auto integer = [&](const char* key) -> int {
        const auto it = j.find(key);
        if (it == j.end()) throw Error(ErrorKind::ParseError, std::string("missing field \"") + key + "\"");
        if (!it->is_number_integer()) {
            throw Error(ErrorKind::ParseError, std::string("field \"") + key + "\" is not an integer");
        }
        return it->get<int>();
    };

    CameraModel m;
    m.image_width = integer("image_width");
    m.image_height = integer("image_height");
    m.fx = number("fx", true, 0.0);
    m.fy = number("fy", true, 0.0);
    m.cx = number("cx", true, 0.0);
    m.cy = number("cy", true, 0.0);
    m.skew = number("skew", false, 0.0);
    m.k1 = number("k1", true, 0.0);
    m.k2 = number("k2", true, 0.0);
    m.k3 = number("k3", false, 0.0);
    m.p1 = number("p1", true, 0.0);
    m.p2 = number("p2", true, 0.0);
    if (!(m.fx > 0.0) || !(m.fy > 0.0)) throw Error(ErrorKind::ParseError, "focal lengths must be positive");
    return m;
}

inline CameraModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::FileError, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

/// Board geometry shared by every view of a corners file.
struct BoardSpec {
    int rows = 6;
    int cols = 9;
    double square_size_m = 0.025;
};

/// Object points in row-major board order: (col * square, row * square).
inline std::vector<Point2> board_object_points(const BoardSpec& board) {
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(board.rows * board.cols));
    for (int r = 0; r < board.rows; ++r)
        for (int c = 0; c < board.cols; ++c) pts.push_back({c * board.square_size_m, r * board.square_size_m});
    return pts;
}

// Corners file: per view a header "view <n> <rows> <cols> <square_size_m>"
// followed by rows*cols lines "u v". Blank lines and '#' comments are skipped.
inline std::vector<ChessboardObservation> parse_corners(std::istream& in) {
    std::vector<ChessboardObservation> views;
    std::string line;
    int line_no = 0;
    int remaining = 0;
    auto fail = [&](const std::string& why) {
        throw Error(ErrorKind::ParseError, "corners line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        if (remaining == 0) {
            std::string tag;
            int index = 0;
            BoardSpec b;
            if (!(ls >> tag >> index >> b.rows >> b.cols >> b.square_size_m) || tag != "view") {
                fail("expected header \"view <n> <rows> <cols> <square_size_m>\"");
            }
            std::string extra;
            if (ls >> extra) fail("trailing tokens after view header");
            if (b.rows < 2 || b.cols < 2 || !(b.square_size_m > 0.0)) fail("invalid board geometry");
            ChessboardObservation obs;
            obs.object_points = board_object_points(b);
            obs.image_points.reserve(obs.object_points.size());
            views.push_back(std::move(obs));
            remaining = b.rows * b.cols;
            continue;
        }
        Point2 p;
        if (!(ls >> p.x >> p.y)) fail("expected \"u v\"");
        std::string extra;
        if (ls >> extra) fail("trailing tokens after corner");
        views.back().image_points.push_back(p);
        --remaining;
    }
    if (remaining != 0) {
        throw Error(ErrorKind::ParseError, "corners file ends inside a view (" + std::to_string(remaining) + " corners missing)");
    }
    return views;
}

inline std::vector<ChessboardObservation> load_corners(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::FileError, "cannot open " + path.string());
    return parse_corners(in);
}

inline void save_corners(const std::vector<ChessboardObservation>& views, const BoardSpec& board,
                         const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::FileError, "cannot write " + path.string());
    out.precision(10);
    for (std::size_t v = 0; v < views.size(); ++v) {
        out << "view " << v << ' ' << board.rows << ' ' << board.cols << ' ' << board.square_size_m << '\n';
        for (const auto& p : views[v].image_points) out << p.x << ' ' << p.y << '\n';
    }
}

}  // namespace lanekit
