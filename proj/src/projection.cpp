#include "triage/projection.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>

#include "triage/errors.hpp"
#include "triage/random.hpp"

namespace triage {

std::string_view to_string(ProjectionMethod m) { return m == ProjectionMethod::Pca ? "pca" : "tsne"; }

ProjectionMethod parse_projection_method(std::string_view s) {
  if (s == "pca") return ProjectionMethod::Pca;
  if (s == "tsne") return ProjectionMethod::Tsne;
  throw ArgumentError("unknown projection method '" + std::string(s) + "'");
}

std::size_t ProjectionMap::dimension() const {
  return static_cast<std::size_t>(method == ProjectionMethod::Pca ? mean.size() : embeddings.cols());
}

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * x * x.transpose()).colwise() + norms;
  d.rowwise() += norms.transpose();
  return d.cwiseMax(0.0);
}

// Conditional affinities with per-point precision tuned to the perplexity.
Eigen::MatrixXd affinities(const Eigen::MatrixXd& d2, double perplexity) {
  const Eigen::Index n = d2.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Distances are shifted by the nearest neighbour's so the largest term
    // is exp(0); the shift cancels in the normalised row.
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) nearest = std::min(nearest, d2(i, j));
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100; ++iter) {
      double sum = 0;
      double weighted = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double dist = d2(i, j) - nearest;
        row(j) = j == i ? 0.0 : std::exp(-dist * beta);
        sum += row(j);
        weighted += dist * row(j);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
      } else {
        hi = beta;
        beta = (beta + lo) / 2;
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd num = (1.0 + squared_distances(y).array()).inverse().matrix();
  const Eigen::Index n = y.rows();
  double z = num.sum() - static_cast<double>(n);  // diagonal entries are 1
  double kl = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = std::max(num(i, j) / z, 1e-12);
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

}  // namespace

TsneResult tsne(const Eigen::MatrixXd& x, const TsneOptions& o) {
  const Eigen::Index n = x.rows();
  if (n < 3) throw ArgumentError("t-SNE needs at least 3 points");
  const double perplexity = std::min(o.perplexity, std::max(1.0, static_cast<double>(n - 1) / 3.0));
  Eigen::MatrixXd p = affinities(squared_distances(x), perplexity);
  p = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  Rng rng(o.seed);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal(0.0, 1e-4);
  TsneResult r;
  r.initial_kl = kl_divergence(p, y);

  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd grad(n, 2);
  for (int it = 0; it < o.iterations; ++it) {
    const double exaggeration = it < o.exaggeration_iterations ? o.early_exaggeration : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;
    Eigen::MatrixXd num = (1.0 + squared_distances(y).array()).inverse().matrix();
    num.diagonal().setZero();
    const double z = num.sum();
    // grad_i = 4 sum_j (P_ij - Q_ij) num_ij (y_i - y_j)
    const Eigen::MatrixXd w = ((exaggeration * p).array() - num.array() / z).matrix().cwiseProduct(num);
    grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      double& g = gains.data()[k];
      const bool same = (grad.data()[k] > 0) == (update.data()[k] > 0);
      g = same ? std::max(g * 0.8, 0.01) : g + 0.2;
    }
    update = momentum * update - o.learning_rate * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();
  }
  r.final_kl = kl_divergence(p, y);
  r.y = std::move(y);
  return r;
}

ProjectionMap fit_projection(const Eigen::MatrixXd& embeddings, const std::vector<std::string>& ids,
                             const std::vector<Team>& labels, ProjectionMethod method, const TsneOptions& options) {
  const Eigen::Index n = embeddings.rows();
  if (n < 3) throw ArgumentError("projection needs at least 3 points, got " + std::to_string(n));
  if (ids.size() != static_cast<std::size_t>(n) || labels.size() != ids.size()) {
    throw ArgumentError("projection: ids/labels do not match the embedding rows");
  }
  if (!embeddings.allFinite()) throw ArgumentError("projection: non-finite embedding values");
  ProjectionMap map;
  map.method = method;
  Eigen::MatrixXd coords(n, 2);
  if (method == ProjectionMethod::Pca) {
    map.mean = embeddings.colwise().mean();
    const Eigen::MatrixXd centred = embeddings.rowwise() - map.mean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
    const Eigen::Index d = embeddings.cols();
    map.components = Eigen::MatrixXd::Zero(2, d);
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, svd.matrixV().cols()); ++k) {
      Eigen::RowVectorXd c = svd.matrixV().col(k).transpose();
      // Fix the sign so the largest-magnitude loading is positive.
      Eigen::Index arg = 0;
      c.cwiseAbs().maxCoeff(&arg);
      if (c(arg) < 0) c = -c;
      map.components.row(k) = c;
      map.explained_variance(k) = svd.singularValues()(k) * svd.singularValues()(k) / static_cast<double>(n - 1);
    }
    coords = centred * map.components.transpose();
  } else {
    map.tsne = options;
    TsneResult r = tsne(embeddings, options);
    map.initial_kl = r.initial_kl;
    map.final_kl = r.final_kl;
    map.embeddings = embeddings;
    coords = std::move(r.y);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    map.points.push_back({ids[static_cast<std::size_t>(i)], coords(i, 0), coords(i, 1), labels[static_cast<std::size_t>(i)]});
  }
  return map;
}

QueryPlacement project_query(const ProjectionMap& map, const Eigen::RowVectorXd& query) {
  if (static_cast<std::size_t>(query.size()) != map.dimension()) {
    throw ArgumentError("query dimension " + std::to_string(query.size()) + " does not match map dimension " +
                        std::to_string(map.dimension()));
  }
  QueryPlacement q;
  if (map.method == ProjectionMethod::Pca) {
    const Eigen::RowVector2d xy = (query - map.mean) * map.components.transpose();
    q.x = xy(0);
    q.y = xy(1);
    return q;
  }
  // t-SNE has no out-of-sample map: place the query on its nearest training point.
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < map.embeddings.rows(); ++i) {
    const double d = (map.embeddings.row(i) - query).squaredNorm();
    if (d < best) {
      best = d;
      q.nearest = static_cast<std::size_t>(i);
    }
  }
  q.x = map.points[q.nearest].x;
  q.y = map.points[q.nearest].y;
  q.approximate = true;
  return q;
}

std::string projection_to_json(const ProjectionMap& map, std::optional<Team> filter) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["method"] = to_string(map.method);
  nlohmann::ordered_json fitj;
  if (map.method == ProjectionMethod::Pca) {
    fitj["explained_variance"] = {map.explained_variance(0), map.explained_variance(1)};
  } else {
    fitj["seed"] = map.tsne.seed;
    fitj["iterations"] = map.tsne.iterations;
    fitj["perplexity"] = map.tsne.perplexity;
    fitj["initial_kl"] = map.initial_kl;
    fitj["final_kl"] = map.final_kl;
  }
  j["fit"] = fitj;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const auto& p : map.points) {
    if (filter && p.team != *filter) continue;
    pts.push_back({{"instance_id", p.instance_id}, {"x", p.x}, {"y", p.y}, {"team", team_code(p.team)}});
  }
  j["count"] = pts.size();
  j["points"] = std::move(pts);
  return j.dump();
}

}  // namespace triage
