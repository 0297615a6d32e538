#!/usr/bin/env python3
"""
Configuration Management Utility for the anomaly detection package.

This script helps users:
1. Validate the environment settings (.env)
2. Generate a template .env file
3. Validate JSON run configurations under configs/
4. Print the current configuration summary
"""

import sys
import argparse
from pathlib import Path

# Add the src directory to the path so we can import our modules
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / 'src'))

from stad.core.config import validate_config, create_env_template, print_config_summary
from stad.core.exceptions import ConfigError
from stad.models import RunConfig

CONFIGS_DIR = project_root / 'configs'


def validate_current_config():
    """Validate the environment settings and print results."""
    print("🔍 Validating Environment Settings...")
    print("=" * 50)

    is_valid, problems = validate_config()

    if is_valid:
        print("✅ Environment settings are valid!")
    else:
        print(f"❌ {len(problems)} invalid settings:")
        for problem in problems:
            print(f"  - {problem}")
        print("\nFix these in your .env file or environment.")

    print("\n" + "=" * 50)
    return is_valid


def generate_env_template():
    """Generate a template .env file."""
    print("📝 Generating Environment Template...")
    print("=" * 50)

    template_content = create_env_template()
    template_path = Path('.env.template')
    try:
        template_path.write_text(template_content)
        print(f"✅ Template created: {template_path.absolute()}")
        print("Copy this file to .env and adjust the settings.")
    except OSError as e:
        print(f"❌ Error creating template: {e}")
        print("\nTemplate content:")
        print("-" * 30)
        print(template_content)

    print("\n" + "=" * 50)


def show_config_summary():
    """Show a summary of the current environment settings."""
    print("📊 Current Configuration Summary")
    print("=" * 50)
    print_config_summary()


def check_run_configs(paths):
    """Validate JSON run configurations; defaults to every file under configs/."""
    print("🧪 Run Configurations")
    print("=" * 50)

    if not paths:
        paths = sorted(CONFIGS_DIR.glob('*.json'))
    if not paths:
        print(f"No run configurations found under {CONFIGS_DIR}")

    all_valid = True
    for path in paths:
        try:
            run_config = RunConfig.from_file(str(path))
            print(f"✅ {Path(path).name:32} scales={run_config.scales} M={run_config.num_students} "
                  f"λ=(k {run_config.teacher_lambda_k}, m {run_config.teacher_lambda_m}, c {run_config.teacher_lambda_c})")
        except ConfigError as e:
            all_valid = False
            print(f"❌ {Path(path).name}: {e}")

    print("\n" + "=" * 50)
    return all_valid


def interactive_setup():
    """Interactive configuration setup."""
    print("🛠️  Interactive Configuration Setup")
    print("=" * 50)

    try:
        env_path = Path('.env')
        if env_path.exists():
            response = input("📁 .env file already exists. Overwrite? (y/N): ").strip().lower()
            if response != 'y':
                print("Setup cancelled.")
                return

        env_path.write_text(create_env_template())
        print(f"✅ Created {env_path.absolute()}")
        print("\n📋 Next steps:")
        print("1. Edit the .env file (run root, data root, workers)")
        print("2. Run 'python scripts/config_manager.py --validate' to check it")
        print("3. Generate data with 'python src/stad/main.py synth' and start with 'train-teacher'")

    except KeyboardInterrupt:
        print("\n\nSetup cancelled.")

    print("\n" + "=" * 50)


def main():
    """Main function to handle command line arguments."""
    parser = argparse.ArgumentParser(
        description="Configuration Management Utility for student-teacher anomaly detection",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python scripts/config_manager.py --validate                 # Validate .env settings
  python scripts/config_manager.py --template                 # Generate .env template
  python scripts/config_manager.py --summary                  # Show config summary
  python scripts/config_manager.py --run-configs              # Validate configs/*.json
  python scripts/config_manager.py --run-configs my_run.json  # Validate one file
  python scripts/config_manager.py --all                      # Run all checks
        """
    )

    parser.add_argument('--validate', action='store_true',
                        help='Validate environment settings')
    parser.add_argument('--template', action='store_true',
                        help='Generate .env template file')
    parser.add_argument('--summary', action='store_true',
                        help='Show configuration summary')
    parser.add_argument('--run-configs', nargs='*', metavar='FILE',
                        help='Validate JSON run configurations (default: configs/*.json)')
    parser.add_argument('--setup', action='store_true',
                        help='Interactive configuration setup')
    parser.add_argument('--all', action='store_true',
                        help='Run all checks and show complete status')

    args = parser.parse_args()

    if not any(v not in (None, False) for v in vars(args).values()):
        parser.print_help()
        return 0

    print("🚀 Student-Teacher Anomaly Detection - Configuration Manager")
    print("=" * 60)
    print()

    ok = True
    if args.setup:
        interactive_setup()

    if args.template:
        generate_env_template()

    if args.validate or args.all:
        ok = validate_current_config() and ok

    if args.summary or args.all:
        show_config_summary()

    if args.run_configs is not None or args.all:
        ok = check_run_configs(args.run_configs or []) and ok

    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
