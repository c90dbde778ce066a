# Core module for HeomCast: HEOM propagation, datasets and SARIMA forecasting
