# Back-translation augmentation
