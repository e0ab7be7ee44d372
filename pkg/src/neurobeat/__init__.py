"""EEG-based music onset detection: preprocessing, FCN/GRU predictors,
peak picking, baselines and tolerance-window evaluation."""

__version__ = "0.1.0"
