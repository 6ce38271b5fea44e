"""Chemotherapy-response prediction for pediatric low-grade glioma."""
__version__ = "0.1.0"
