# Closed-form truths: true variances, estimator biases, design comparisons
