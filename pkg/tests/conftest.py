from hypothesis import HealthCheck, settings

# LP-backed properties are slow per example; wall-clock deadlines only add
# flakiness on loaded CI boxes.
settings.register_profile(
    "densecsp",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("densecsp")
