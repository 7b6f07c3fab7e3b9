# Point and variance estimators for blocked experiments
from estimators.point import tau_hat_blk, tau_hat_cr
from estimators.report import EstimateReport, estimate, estimate_many
from estimators.variance import (
    var_big_blocks,
    var_hybrid,
    var_neyman_cr,
    var_plug_in,
    var_rct_yes,
    var_small_equal,
    var_small_grouped,
    var_small_stratified,
    var_small_unified,
    var_srs_unbiased,
)
from estimators.weights import SbpWeights, sbp_weights
