# ========================================
# Provenance and discrepancy notes
# ========================================

DISCREPANCY_NOTE_TEMPLATE = (
    "{quantity}: computed {computed:.6g} disagrees with quoted {quoted:.6g} "
    "({relative:+.1%}); computed value is used"
)

DEFAULT_MODE_VOLUME_NOTE = "mode_volume: not given, using (wavelength/n)^3 = {volume:.6g} m^3"


# ========================================
# Regime warnings
# ========================================

BAD_CAVITY_FLAG_TEMPLATE = (
    "{expansion} expansion outside its clean regime: {condition} "
    "(kappa/g = {kappa_ratio:.3g}); reconstruction error grows as (g/kappa)^2"
)

PULSE_BANDWIDTH_WARNING_TEMPLATE = (
    "pulse bandwidth 1/T_p = {inverse_pulse:.4g} rad/s is comparable to the narrow "
    "feature width g^2/kappa = {narrow_width:.4g} rad/s; the pulse-averaged amplitude is approximate"
)

SMALL_PARAMETER_WARNING_TEMPLATE = (
    "closed-form fidelity term '{term}' = {value:.4g} exceeds {limit:g}; "
    "the first-order expansion is unreliable"
)


# ========================================
# CLI messages
# ========================================

CLI_ERROR_TEMPLATE = "Error ({kind}): {error}"

CLI_OUTPUT_TEMPLATE = "Wrote {what} to {path}"

AUDIT_SUMMARY_TEMPLATE = "Audit: {total} quantities, {matched} match, {flagged} flagged ({flagged_names})"
