"""Configure Django before pytest collects the lyapcert test modules."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'LyapcertProject.settings')
django.setup()
