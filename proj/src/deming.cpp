#include "wealthdyn/deming.hpp"

namespace wealthdyn {

template struct DemingFit<double>;
template DemingFit<double> deming_fit<double>(const Eigen::VectorXd&, const Eigen::VectorXd&, double,
                                              const std::vector<int>&);
template DemingFit<long double> deming_fit<long double>(const Eigen::Matrix<long double, Eigen::Dynamic, 1>&,
                                                        const Eigen::Matrix<long double, Eigen::Dynamic, 1>&,
                                                        long double, const std::vector<int>&);

}  // namespace wealthdyn
