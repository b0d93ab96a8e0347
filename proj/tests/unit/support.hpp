#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/dataset.hpp"
#include "core/rng.hpp"

namespace zslb::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("zslb-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  return m;
}

inline PrototypeTable prototype_table(const Eigen::MatrixXd& cols, const std::vector<ClassId>& ids) {
  PrototypeTable t;
  t.dim = static_cast<std::size_t>(cols.rows());
  t.ids = ids;
  for (Eigen::Index j = 0; j < cols.cols(); ++j)
    for (Eigen::Index k = 0; k < cols.rows(); ++k) t.values.push_back(static_cast<float>(cols(k, j)));
  return t;
}

// N=4, D=3, M=2; classes 1,2 seen (rows 0,1) and 3,4 unseen (rows 2,3).
inline Dataset tiny_dataset() {
  Dataset ds;
  ds.name = "tiny";
  ds.embeddings = {4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0}};
  ds.labels = {1, 2, 3, 4};
  ds.prototypes.dim = 2;
  ds.prototypes.ids = {1, 2, 3, 4};
  ds.prototypes.values = {1, 0, 0, 1, 0.6f, 0.8f, -0.8f, 0.6f};
  ds.split = {{1, 2}, {3, 4}, {0, 1}, {2, 3}};
  return ds;
}

}  // namespace zslb::test
