"""Named RNG substreams.

Every random draw in the pipeline uses np.random.default_rng([seed, STREAM])
so that adding a consumer never perturbs the draws of another.
"""

SCATTERERS = 11
SPLIT = 23
WEIGHT_INIT = 37
TRAIN_LOOP = 41
BASELINE = 53
STABILITY = 67
