#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tdrl/common.hpp"
#include "tdrl/condition.hpp"
#include "tdrl/trainer.hpp"

namespace tdrl {

// key = value text document, one entry per line
std::string to_key_value(const std::vector<std::pair<std::string, std::string>>& entries);

std::string format_double(double v);

std::string condition_report_text(const ConditionReport& rep);

std::string history_csv(const TrainHistory& hist);

std::string matrix_csv(const MatrixXd& m);

// scatter of up to max_points (x, y) pairs as a standalone SVG image
std::string svg_scatter(const VectorXd& x, const VectorXd& y, const std::string& title,
                        int max_points = 2000);

}  // namespace tdrl
