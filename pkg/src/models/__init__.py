# Embedding backends and the feed-forward classifier
