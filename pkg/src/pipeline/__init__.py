# Prediction and end-to-end orchestration
