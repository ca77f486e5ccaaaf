# Configuration module for the ISAC radar toolkit
