"""Measurement-based feedback cooling of quantum systems without state filtering."""
