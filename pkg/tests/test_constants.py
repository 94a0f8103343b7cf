"""
Tests for utils.constants module
"""

from utils.constants import EnergyCost, OutputFile, PassId, StreamLabel


class TestStreamLabel:
    """Random stream labels"""

    def test_labels_are_distinct(self):
        labels = [
            StreamLabel.WEIGHT_INIT,
            StreamLabel.POISSON,
            StreamLabel.SHUFFLE,
            StreamLabel.NOISE,
            StreamLabel.AUGMENT,
            StreamLabel.EQUIVALENCE,
        ]
        assert len(set(labels)) == len(labels)

    def test_eval_pass_id_never_collides_with_an_epoch(self):
        assert PassId.EVAL == 2**32 - 1
        assert PassId.EVAL > 100_000


class TestEnergyCost:
    """45 nm energy table"""

    def test_mac_is_mult_plus_add(self):
        assert EnergyCost.E_MAC == EnergyCost.E_MULT + EnergyCost.E_ADD

    def test_accumulate_is_cheaper_than_mac(self):
        assert EnergyCost.E_AC < EnergyCost.E_MAC
        assert EnergyCost.E_MAC / EnergyCost.E_AC > 5


class TestOutputFile:
    def test_names_are_unique(self):
        names = [
            value
            for key, value in vars(OutputFile).items()
            if key.isupper()
        ]
        assert len(set(names)) == len(names)
        assert OutputFile.METRICS == "metrics.csv"
