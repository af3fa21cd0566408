"""Two-scale homogenization: corrector problems and the coefficients built on them."""
from .cache import (config_digest, get_homog_coefs_linear, macro_material_bridge,
                    read_cache)
from .coefs import (CoefficientDef, RequirementDef, eval_coef_eval,
                    eval_shape_dim, eval_shape_dim_dim, parse_definitions)
from .engine import HomogResults, TaskGraph, resolve_dependencies, run_engine

__all__ = ['CoefficientDef', 'HomogResults', 'RequirementDef', 'TaskGraph',
           'config_digest', 'eval_coef_eval', 'eval_shape_dim',
           'eval_shape_dim_dim', 'get_homog_coefs_linear',
           'macro_material_bridge', 'parse_definitions', 'read_cache',
           'resolve_dependencies', 'run_engine']
