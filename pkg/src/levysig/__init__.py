"""Signatures of càdlàg paths and Lévy-type signature market models."""
from .calculus import (
    PayoffLifter,
    SigModelParams,
    SigPayoff,
    StructuralError,
    alpha_coefficient,
    alpha_sum,
    payoff_lift,
    sig_model_representation,
    tilde_transform,
)
from .levy import (
    ExpectedSignatureCache,
    LevyTriplet,
    build_generator_Q,
    conditional_expected_signature,
    expected_signature,
    generator_apply,
    moment_formula,
    primary_process_triplet,
)
from .market import (
    BatchSimulator,
    MeasureChangeSpec,
    SimulationGrid,
    evaluate_model_from_signature,
    mc_moments,
    measure_change_translate,
    simulate_model_direct,
    simulate_primary,
)
from .paths import CadlagSamplePath, j1_distance, p_variation, rough_p_variation
from .signature import SignaturePath, ito_iterated_sum, marcus_signature, signature_increment
from .tensor import (
    TensorElement,
    WordCombination,
    dilate,
    eval_word_combination,
    group_inverse,
    homogeneous_norm,
    parse_word,
    format_word,
    tensor_exp,
    tensor_log,
    tensor_product,
    word_shuffle,
)
from .valuation import (
    HedgeReport,
    fit_path_functional,
    hedge_pnl_mc,
    hedge_strategy,
    mc_price,
    price_sig_payoff,
)
