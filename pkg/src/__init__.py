# Costume Core garment-description mapper
