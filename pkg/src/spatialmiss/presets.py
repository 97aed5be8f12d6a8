"""Named model families.

``M1`` .. ``M4``
    Simulation models; spatial scales and ranges fixed at their true values.
``M1*`` .. ``M4*``
    The same with ``sigma`` and ``lambda`` sampled.
``M1real`` .. ``M4real``
    Six-covariate household-income family: ``x1`` (hours worked, log) and
    ``x2`` (wage, log) are missing-prone; ``x3`` .. ``x6`` are GDP, age,
    urban and household size.

The real-data family accepts ``mechanism="MAR"`` (indicators on
``x3 .. x6`` and ``y``), ``mechanism="MNAR"`` (additionally both covariate
spatial effects) and ``correlation="car"`` for all three spatial effects.
"""

from .errors import InvalidInputError
from .model import CovariateSubModel, MissingnessSpec, ModelSpec, ResponseModel
from .simgen import SimTruths, mar_missingness, simulation_model

#: which covariate sub-models carry a spatial effect: (x1, x2)
_REAL_SPATIAL = {"M1real": (True, True), "M2real": (False, False),
                 "M3real": (False, True), "M4real": (True, False)}

_REAL_MAR = ("x3", "x4", "x5", "x6", "y")


def real_data_missingness(mechanism="MAR", sample=True):
    mechanism = mechanism.upper()
    if mechanism == "MAR":
        tokens = _REAL_MAR
    elif mechanism == "MNAR":
        tokens = _REAL_MAR + ("wx2", "wx1")
    else:
        raise InvalidInputError(f"unknown mechanism {mechanism!r}")
    return MissingnessSpec(mechanism=mechanism, predictors=(tokens, tokens), sample=sample)


def real_data_model(variant="M1real", mechanism="MAR", correlation="exponential", sample_phi=True):
    if variant not in _REAL_SPATIAL:
        raise InvalidInputError(f"unknown variant {variant!r}; choose from {sorted(_REAL_SPATIAL)}")
    sp1, sp2 = _REAL_SPATIAL[variant]
    if mechanism is not None and mechanism.upper() == "MNAR" and not (sp1 and sp2):
        raise InvalidInputError("the MNAR mechanism uses both covariate spatial effects; use M1real")
    response = ResponseModel(predictors=(0, 1, 2, 3, 4, 5), correlation=correlation)
    sub1 = CovariateSubModel(target=0, predictors=(2, 3, 4, 5), spatial=sp1, correlation=correlation)
    sub2 = CovariateSubModel(target=1, predictors=(0, 2, 3, 4), spatial=sp2, correlation=correlation)
    miss = None if mechanism is None else real_data_missingness(mechanism, sample_phi)
    return ModelSpec(response=response, submodels=(sub1, sub2), missingness=miss)


def simulation_mnar_missingness():
    """Fitted counterpart of :func:`spatialmiss.simgen.gen_missingness_mnar`."""
    return MissingnessSpec(mechanism="MNAR",
                           predictors=(("x3", "y", "wx1", "wx2"), ("x3", "y", "r1", "wx1", "wx2")))


PRESETS = tuple(f"M{k}" for k in range(1, 5)) + tuple(f"M{k}*" for k in range(1, 5)) + tuple(_REAL_SPATIAL)


def preset(name, mechanism="MAR", correlation="exponential", sample_phi=True, truths=SimTruths()):
    """Resolve a family name to a :class:`ModelSpec`.

    ``mechanism`` is ``"MAR"``, ``"MNAR"`` or ``None`` (no missingness
    model).  For the simulation family ``correlation`` must stay
    exponential.
    """
    if name in _REAL_SPATIAL:
        return real_data_model(name, mechanism, correlation, sample_phi)
    base = name.rstrip("*")
    if base not in ("M1", "M2", "M3", "M4") or name.count("*") > 1:
        raise InvalidInputError(f"unknown model preset {name!r}; choose from {list(PRESETS)}")
    if correlation != "exponential":
        raise InvalidInputError("the simulation family uses the exponential kernel only")
    if mechanism is None:
        miss = None
    elif mechanism.upper() == "MAR":
        miss = mar_missingness(sample_phi)
    elif mechanism.upper() == "MNAR":
        miss = simulation_mnar_missingness()
    else:
        raise InvalidInputError(f"unknown mechanism {mechanism!r}")
    return simulation_model(base, free_spatial=name.endswith("*"), truths=truths, missingness=miss)
