"""Plant-leaf disease detection: YCbCr conversion, GA color clustering,
GLCM texture features and multi-kernel SVM classification."""

__version__ = "0.1.0"
