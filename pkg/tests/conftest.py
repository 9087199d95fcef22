import hypothesis

# Numeric property tests routinely exceed hypothesis' default 200ms deadline
# on shared CI machines; correctness here is not time-sensitive.
hypothesis.settings.register_profile(
    "vqlab", deadline=None, derandomize=True, max_examples=50
)
hypothesis.settings.load_profile("vqlab")
