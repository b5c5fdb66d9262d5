import hypothesis

hypothesis.settings.register_profile(
    "txnrepair",
    deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("txnrepair")
