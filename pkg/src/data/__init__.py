# Sentence-level dataset construction
