#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "faceedit/animation.hpp"
#include "faceedit/random.hpp"

namespace testutil {

// Scratch directory under the system temp root, wiped per construction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / "faceedit_tests" / name;
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline faceedit::Animation random_animation(int length, int n_shapes, faceedit::Rng& rng,
                                            double fps = 25.0) {
    faceedit::Animation anim;
    anim.fps = fps;
    for (int c = 0; c < n_shapes; ++c)
        anim.names.push_back("shape_" + std::to_string(c));
    anim.frames.resize(length, n_shapes);
    for (int t = 0; t < length; ++t)
        for (int c = 0; c < n_shapes; ++c)
            anim.frames(t, c) = faceedit::uniform01(rng);
    return anim;
}

inline faceedit::Animation constant_animation(int length, int n_shapes, double value,
                                              double fps = 25.0) {
    faceedit::Animation anim;
    anim.fps = fps;
    for (int c = 0; c < n_shapes; ++c)
        anim.names.push_back("shape_" + std::to_string(c));
    anim.frames = Eigen::MatrixXd::Constant(length, n_shapes, value);
    return anim;
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// |a-b| <= rel*max(|a|,|b|) + floor, the usual two-sided relative test.
inline bool rel_close(double a, double b, double rel, double floor_abs) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + floor_abs;
}

}  // namespace testutil
