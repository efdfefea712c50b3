#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "triage/team.hpp"

namespace triage {

enum class ProjectionMethod { Pca, Tsne };
std::string_view to_string(ProjectionMethod m);
ProjectionMethod parse_projection_method(std::string_view s);

struct TsneOptions {
  double perplexity = 30;
  int iterations = 1000;
  double learning_rate = 200;
  double early_exaggeration = 12;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 7;
};

struct ProjectionPoint {
  std::string instance_id;
  double x = 0;
  double y = 0;
  Team team = Team::ED;
};

struct ProjectionMap {
  ProjectionMethod method = ProjectionMethod::Pca;
  std::vector<ProjectionPoint> points;
  // pca: centring mean and the two unit components (2 x d)
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;
  Eigen::Vector2d explained_variance = Eigen::Vector2d::Zero();
  // tsne: fit settings and the training embeddings for query placement
  TsneOptions tsne;
  double initial_kl = 0;
  double final_kl = 0;
  Eigen::MatrixXd embeddings;

  std::size_t dimension() const;
};

// Rows of `embeddings` are points. Throws ArgumentError for fewer than 3
// points or mismatched ids/labels.
ProjectionMap fit_projection(const Eigen::MatrixXd& embeddings, const std::vector<std::string>& ids,
                             const std::vector<Team>& labels, ProjectionMethod method,
                             const TsneOptions& tsne = {});

struct QueryPlacement {
  double x = 0;
  double y = 0;
  bool approximate = false;  // tsne: nearest training point
  std::size_t nearest = 0;   // tsne only
};

QueryPlacement project_query(const ProjectionMap& map, const Eigen::RowVectorXd& query);

// Exact t-SNE on the rows of `x`; returns n x 2 coordinates and the KL
// divergence of the initial and final layouts.
struct TsneResult {
  Eigen::MatrixXd y;
  double initial_kl = 0;
  double final_kl = 0;
};
TsneResult tsne(const Eigen::MatrixXd& x, const TsneOptions& options);

std::string projection_to_json(const ProjectionMap& map, std::optional<Team> filter = std::nullopt);

}  // namespace triage
