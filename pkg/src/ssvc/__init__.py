"""Video captioning with a stacked-attention bidirectional LSTM
encoder-decoder, plus corpus BLEU and human SS-Score evaluation."""

__version__ = "0.1.0"
