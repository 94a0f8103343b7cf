"""
Engine-wide constants.
"""


class StreamLabel:
    """Labels of the independent random streams derived from the master seed"""

    WEIGHT_INIT = 1
    POISSON = 2
    SHUFFLE = 3
    NOISE = 4
    AUGMENT = 5
    EQUIVALENCE = 6


class PassId:
    """Pass ids keying Poisson frames outside of training epochs"""

    # Training passes use the epoch index; evaluation always uses this id
    EVAL = 2**32 - 1


class EnergyCost:
    """Per-operation energy, 45 nm CMOS (pJ) and neuromorphic (normalized units)"""

    E_MULT = 3.7
    E_ADD = 0.9
    E_MAC = 4.6  # E_MULT + E_ADD
    E_AC = 0.9

    E_DYN = 0.4
    E_STA = 0.6


class OutputFile:
    """Fixed file names written under --out"""

    MANIFEST = "manifest.json"
    METRICS = "metrics.csv"
    SPIKES = "spikes.csv"
    ENERGY = "energy.txt"
    NOISE = "noise.csv"
    FGSM = "fgsm.csv"
    EXIT = "exit.txt"
    EXIT_SWEEP = "exit_sweep.csv"
    GAMMA = "gamma.csv"
    GAMMA_HIST = "gamma_hist.csv"
    FINAL_CHECKPOINT = "final.ckpt"
