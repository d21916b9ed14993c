# Vocabulary, corpus records and sentence preprocessing
