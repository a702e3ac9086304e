#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nearopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Contiguous [path][node][component] storage. Component slices are
// contiguous, so per-(path,node) vectors can be mapped without copies.
class PathArray {
public:
    PathArray() = default;

    PathArray(std::size_t n_paths, std::size_t n_nodes, std::size_t dim,
              double fill = 0.0)
        : paths_(n_paths), nodes_(n_nodes), dim_(dim),
          data_(n_paths * n_nodes * dim, fill) {}

    std::size_t n_paths() const { return paths_; }
    std::size_t n_nodes() const { return nodes_; }
    std::size_t dim() const { return dim_; }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t p, std::size_t i, std::size_t c) {
        return data_[(p * nodes_ + i) * dim_ + c];
    }
    double at(std::size_t p, std::size_t i, std::size_t c) const {
        return data_[(p * nodes_ + i) * dim_ + c];
    }

    Eigen::Map<Vec> vec(std::size_t p, std::size_t i) {
        return Eigen::Map<Vec>(&data_[(p * nodes_ + i) * dim_], dim_);
    }
    Eigen::Map<const Vec> vec(std::size_t p, std::size_t i) const {
        return Eigen::Map<const Vec>(&data_[(p * nodes_ + i) * dim_], dim_);
    }

    bool same_shape(const PathArray& other) const {
        return paths_ == other.paths_ && nodes_ == other.nodes_ &&
               dim_ == other.dim_;
    }

    const std::vector<double>& raw() const { return data_; }
    std::vector<double>& raw() { return data_; }

private:
    std::size_t paths_ = 0;
    std::size_t nodes_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

} // namespace nearopt
